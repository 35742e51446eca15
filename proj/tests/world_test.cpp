// Cluster physics checks: analytic spring frequency, transient-free spawn,
// dissipation, gripper integration, contact bookkeeping, grasp/latch
// semantics, spawn distribution, and the divergence guard.
#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "stempick/world.hpp"

namespace stempick {
namespace {

World single_berry_world(const Vec3& anchor, WorldConfig cfg,
                         const Pose& gripper_pose) {
  std::vector<Strawberry> berries{make_strawberry(0, BerryColor::red, anchor, cfg)};
  GripperBody gripper;
  gripper.pose = gripper_pose;
  gripper.apparent_mass = cfg.gripper.apparent_mass;
  gripper.apparent_inertia = cfg.gripper.apparent_inertia;
  gripper.finger_width = cfg.gripper.max_width;
  gripper.finger_speed = cfg.gripper.finger_speed;
  return World(std::move(cfg), std::move(berries), gripper, 7);
}

Pose far_pose() {
  Pose p;
  p.position = Vec3(-1.0, -1.0, -1.0);  // nowhere near the cluster
  return p;
}

TEST(StemSpring, OscillationFrequencyMatchesAnalytic) {
  WorldConfig cfg;
  cfg.gravity.setZero();
  cfg.berry.stem_damping = 0.0;
  const double k = cfg.berry.stem_stiffness, m = cfg.berry.fruit_mass;
  const double expected_hz = std::sqrt(k / m) / (2.0 * M_PI);

  World world = single_berry_world(Vec3(0.0, 0.0, 0.5), cfg, far_pose());
  Strawberry& s = world.strawberries()[0];
  const double z_eq = s.position.z();
  s.position.z() -= 0.01;  // radial displacement: pure spring mode

  const double dt = 1e-3;
  std::vector<double> crossings;
  double prev = s.position.z() - z_eq;
  for (int tick = 1; tick <= 3000; ++tick) {
    world.step_physics(Wrench{}, dt);
    const double cur = s.position.z() - z_eq;
    if (prev < 0.0 && cur >= 0.0) {  // upward crossing, linear interpolation
      const double frac = prev / (prev - cur);
      crossings.push_back((tick - 1 + frac) * dt);
    }
    prev = cur;
  }
  ASSERT_GE(crossings.size(), 8u);
  const double period =
      (crossings.back() - crossings.front()) / (crossings.size() - 1);
  EXPECT_NEAR(1.0 / period, expected_hz, 0.02 * expected_hz);
}

TEST(StemSpring, SpawnsAtGravityLoadedEquilibrium) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  const Vec3 start = world.strawberries()[0].position;
  // sagged rest length: L0 + mg/k below the anchor
  const double sag =
      cfg.berry.fruit_mass * cfg.gravity.norm() / cfg.berry.stem_stiffness;
  EXPECT_NEAR(start.z(), 0.5 - cfg.berry.stem_rest_length - sag, 1e-12);
  for (int tick = 0; tick < 1000; ++tick) world.step_physics(Wrench{}, 1e-3);
  EXPECT_LT((world.strawberries()[0].position - start).norm(), 1e-12);
  EXPECT_LT(world.strawberries()[0].velocity.norm(), 1e-12);
}

TEST(StemSpring, KickedFruitDissipatesBackToEquilibrium) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  const Vec3 rest_pos = world.strawberries()[0].position;
  const double rest_energy = world.mechanical_energy();
  world.strawberries()[0].velocity = Vec3(1.0, 0.5, -0.3);
  const double kicked_energy = world.mechanical_energy();

  double max_energy = kicked_energy;
  for (int tick = 0; tick < 4000; ++tick) {
    world.step_physics(Wrench{}, 1e-3);
    max_energy = std::max(max_energy, world.mechanical_energy());
  }
  // The discrete integrator may wobble within a band but must not pump energy.
  EXPECT_LT(max_energy, kicked_energy * 1.05);
  EXPECT_LT(world.mechanical_energy(), rest_energy + 1e-6);
  EXPECT_LT((world.strawberries()[0].position - rest_pos).norm(), 1e-3);
}

TEST(PickingPoint, SitsOnLowerThirdOfStem) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  const double sag =
      cfg.berry.fruit_mass * cfg.gravity.norm() / cfg.berry.stem_stiffness;
  const double z_center = 0.5 - cfg.berry.stem_rest_length - sag;
  const double z_top = z_center + cfg.berry.fruit_radius;
  const Vec3 pick = world.picking_point(0);
  EXPECT_NEAR(pick.x(), 0.4, 1e-12);
  EXPECT_NEAR(pick.y(), 0.0, 1e-12);
  EXPECT_NEAR(pick.z(), z_top + (0.5 - z_top) / 3.0, 1e-12);
  EXPECT_THROW(world.picking_point(99), ContractViolation);
}

TEST(GripperBody, SemiImplicitIntegrationOfConstantWrench) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  Wrench w;
  w.force = Vec3(2.0, 0.0, 0.0);    // a = 1 m/s^2 with the 2 kg apparent mass
  w.torque = Vec3(0.0, 0.0, 0.05);  // alpha = 1 rad/s^2 with inertia 0.05
  const Vec3 start = world.gripper().pose.position;
  const int n = 1000;
  const double dt = 1e-3;
  for (int tick = 0; tick < n; ++tick) world.step_physics(w, dt);
  EXPECT_NEAR(world.gripper().twist.linear.x(), 1.0, 1e-12);
  // semi-implicit Euler: x = a dt^2 n(n+1)/2
  EXPECT_NEAR(world.gripper().pose.position.x() - start.x(),
              1.0 * dt * dt * n * (n + 1) / 2.0, 1e-9);
  EXPECT_NEAR(world.gripper().twist.angular.z(), 1.0, 1e-12);
  const Eigen::AngleAxisd aa(world.gripper().pose.orientation);
  EXPECT_NEAR(aa.angle(), 1.0 * dt * dt * n * (n + 1) / 2.0, 1e-6);
}

TEST(ContactSet, CanonicalOrderingAndSymmetricMembership) {
  ContactSet set;
  set.add(stem_surface(3), left_finger());  // reversed order on purpose
  EXPECT_TRUE(set.contains(left_finger(), stem_surface(3)));
  EXPECT_TRUE(set.contains(stem_surface(3), left_finger()));
  EXPECT_FALSE(set.contains(right_finger(), stem_surface(3)));
  ASSERT_EQ(set.pairs().size(), 1u);
  // the finger (lower enum) must come first after canonicalization
  EXPECT_EQ(set.pairs()[0].first.kind, SurfaceId::Kind::left_finger_inner);
  EXPECT_EQ(set.pairs()[0].second.kind, SurfaceId::Kind::stem);
  EXPECT_EQ(set.pairs()[0].second.index, 3);
}

TEST(ExclusiveStemGrasp, TruthTable) {
  const int target = 0;
  {
    ContactSet c;
    c.add(left_finger(), stem_surface(target));
    c.add(right_finger(), stem_surface(target));
    EXPECT_TRUE(exclusive_stem_grasp(c, target));
  }
  {
    ContactSet c;  // one finger only
    c.add(left_finger(), stem_surface(target));
    EXPECT_FALSE(exclusive_stem_grasp(c, target));
  }
  {
    ContactSet c;  // touching the target's own fruit is still exclusive
    c.add(left_finger(), stem_surface(target));
    c.add(right_finger(), stem_surface(target));
    c.add(left_finger(), fruit_surface(target));
    EXPECT_TRUE(exclusive_stem_grasp(c, target));
  }
  {
    ContactSet c;  // brushing another berry disqualifies the grasp
    c.add(left_finger(), stem_surface(target));
    c.add(right_finger(), stem_surface(target));
    c.add(right_finger(), fruit_surface(2));
    EXPECT_FALSE(exclusive_stem_grasp(c, target));
  }
  {
    ContactSet c;  // fingers on different stems
    c.add(left_finger(), stem_surface(target));
    c.add(right_finger(), stem_surface(1));
    EXPECT_FALSE(exclusive_stem_grasp(c, target));
  }
  {
    ContactSet c;  // fruit pinch without stem contact is not a grasp
    c.add(left_finger(), fruit_surface(target));
    c.add(right_finger(), fruit_surface(target));
    EXPECT_FALSE(exclusive_stem_grasp(c, target));
  }
  EXPECT_FALSE(exclusive_stem_grasp(ContactSet{}, target));
}

// Gripper posed so its fingers straddle the picking point of a stem.
Pose grasp_pose(const World& world, int id) {
  Pose p;
  p.position = world.picking_point(id) -
               Vec3(world.config().gripper.finger_forward, 0.0, 0.0);
  return p;
}

TEST(ExecuteGripper, NoOpWhenAlreadyInCommandedState) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  EXPECT_EQ(world.execute_gripper(GripperCommand::open), 0);
  EXPECT_EQ(world.gripper().finger_state, FingerState::open);
}

TEST(ExecuteGripper, ClosesOnEmptySpaceWithinTickBudget) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  const int ticks = world.execute_gripper(GripperCommand::close);
  EXPECT_GT(ticks, 0);
  EXPECT_LE(ticks, 600);
  EXPECT_EQ(world.gripper().finger_state, FingerState::closed);
  EXPECT_NEAR(world.gripper().finger_width, 0.0, 1e-12);
  EXPECT_FALSE(world.gripper().attached_id.has_value());
  // and back open
  const int open_ticks = world.execute_gripper(GripperCommand::open);
  EXPECT_GT(open_ticks, 0);
  EXPECT_LE(open_ticks, 600);
  EXPECT_EQ(world.gripper().finger_state, FingerState::open);
  EXPECT_NEAR(world.gripper().finger_width, cfg.gripper.max_width, 1e-12);
}

TEST(ExecuteGripper, LatchesAndAttachesSingleStem) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  world.gripper().pose = grasp_pose(world, 0);
  const int ticks = world.execute_gripper(GripperCommand::close);
  EXPECT_GT(ticks, 0);
  EXPECT_LE(ticks, 600);
  EXPECT_EQ(world.gripper().finger_state, FingerState::closed);
  ASSERT_TRUE(world.gripper().attached_id.has_value());
  EXPECT_EQ(*world.gripper().attached_id, 0);
  // the fingers stop on the stem instead of crushing to zero width
  EXPECT_GT(world.gripper().finger_width, 0.0);

  const ContactSet contacts = world.detect_contacts();
  EXPECT_TRUE(contacts.contains(left_finger(), stem_surface(0)));
  EXPECT_TRUE(contacts.contains(right_finger(), stem_surface(0)));
  EXPECT_TRUE(exclusive_stem_grasp(contacts, 0));

  world.execute_gripper(GripperCommand::open);
  EXPECT_FALSE(world.gripper().attached_id.has_value());
  EXPECT_EQ(world.gripper().finger_state, FingerState::open);
}

TEST(ExecuteGripper, AttachedBerryFollowsGripper) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  world.gripper().pose = grasp_pose(world, 0);
  world.execute_gripper(GripperCommand::close);
  ASSERT_TRUE(world.gripper().attached_id.has_value());

  Wrench pull;
  pull.force = Vec3(-4.0, 0.0, 2.0);
  for (int tick = 0; tick < 200; ++tick) {
    world.step_physics(pull, 1e-3);
    const auto& g = world.gripper();
    const Vec3 local = g.pose.orientation.inverse() *
                       (world.strawberries()[0].position - g.pose.position);
    ASSERT_LT((local - g.attach_local).norm(), 1e-12);
  }
}

TEST(ExecuteGripper, TwoStemsInGapCloseButDoNotAttach) {
  WorldConfig cfg;
  std::vector<Strawberry> berries{
      make_strawberry(0, BerryColor::red, Vec3(0.40, 0.0, 0.5), cfg),
      make_strawberry(1, BerryColor::green, Vec3(0.41, 0.0, 0.5), cfg)};
  GripperBody gripper;
  gripper.pose = far_pose();
  World world(cfg, std::move(berries), gripper, 7);
  // stand slightly back so the finger boxes span both stems in x
  Pose p;
  p.position = world.picking_point(0) -
               Vec3(cfg.gripper.finger_forward - 0.005, 0.0, 0.0);
  world.gripper().pose = p;
  world.gripper().finger_width = cfg.gripper.max_width;
  world.gripper().finger_state = FingerState::open;

  world.execute_gripper(GripperCommand::close);
  EXPECT_EQ(world.gripper().finger_state, FingerState::closed);
  EXPECT_FALSE(world.gripper().attached_id.has_value());
}

TEST(RemoveStrawberry, ContractsAndBookkeeping) {
  WorldConfig cfg;
  std::vector<Strawberry> berries{
      make_strawberry(0, BerryColor::red, Vec3(0.40, 0.0, 0.5), cfg),
      make_strawberry(1, BerryColor::green, Vec3(0.40, 0.06, 0.5), cfg)};
  GripperBody gripper;
  gripper.pose = far_pose();
  World world(cfg, std::move(berries), gripper, 7);

  EXPECT_EQ(world.remaining_red_count(), 1);
  EXPECT_THROW(world.remove_strawberry(1), ContractViolation);  // green
  EXPECT_THROW(world.remove_strawberry(42), ContractViolation);
  world.remove_strawberry(0);
  EXPECT_EQ(world.remaining_red_count(), 0);
  EXPECT_TRUE(world.strawberries()[0].removed);
  EXPECT_THROW(world.remove_strawberry(0), ContractViolation);  // twice

  // removed berries vanish from contact queries
  world.gripper().pose.position =
      world.strawberries()[0].position - Vec3(cfg.gripper.finger_forward, 0, 0);
  world.gripper().finger_width = 0.0;
  EXPECT_TRUE(world.detect_contacts().empty());
}

TEST(RemoveStrawberry, DetachesHeldBerry) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  world.gripper().pose = grasp_pose(world, 0);
  world.execute_gripper(GripperCommand::close);
  ASSERT_TRUE(world.gripper().attached_id.has_value());
  world.remove_strawberry(0);
  EXPECT_FALSE(world.gripper().attached_id.has_value());
}

TEST(DivergenceGuard, ThrowsOnRunawayFruit) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  world.strawberries()[0].velocity = Vec3(11.0, 0.0, 0.0);
  EXPECT_THROW(world.step_physics(Wrench{}, 1e-3), SimulationDiverged);
}

TEST(DivergenceGuard, SqueezingAFruitStaysStable) {
  WorldConfig cfg;
  World world = single_berry_world(Vec3(0.4, 0.0, 0.5), cfg, far_pose());
  // park the finger boxes around the fruit sphere itself
  const Vec3 fruit = world.strawberries()[0].position;
  world.gripper().pose.position = fruit - Vec3(cfg.gripper.finger_forward, 0, 0);
  EXPECT_NO_THROW(world.execute_gripper(GripperCommand::close));
  for (int tick = 0; tick < 500; ++tick)
    EXPECT_NO_THROW(world.step_physics(Wrench{}, 1e-3));
  EXPECT_LT(world.strawberries()[0].velocity.norm(), cfg.max_fruit_speed);
}

TEST(SpawnCluster, GreenCountUniformAndSeparationRespected) {
  WorldConfig cfg;
  RandomizationConfig rand;  // greens uniform on [1, 7]
  std::map<int, int> counts;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const World world = spawn_cluster(cfg, rand, 50000 + t);
    const auto& berries = world.strawberries();
    const int greens = static_cast<int>(berries.size()) - cfg.red_count;
    counts[greens]++;
    ASSERT_GE(greens, rand.green_min);
    ASSERT_LE(greens, rand.green_max);
    ASSERT_EQ(berries[0].color, BerryColor::red);
    for (size_t i = 0; i < berries.size(); ++i) {
      for (size_t j = i + 1; j < berries.size(); ++j)
        ASSERT_GE((berries[i].anchor - berries[j].anchor).norm(),
                  cfg.min_anchor_separation);
      for (int ax = 0; ax < 3; ++ax) {
        ASSERT_GE(berries[i].anchor[ax],
                  cfg.cluster_min[ax] - rand.anchor_jitter - 1e-12);
        ASSERT_LE(berries[i].anchor[ax],
                  cfg.cluster_max[ax] + rand.anchor_jitter + 1e-12);
      }
    }
  }
  for (int g = rand.green_min; g <= rand.green_max; ++g) {
    const double freq = static_cast<double>(counts[g]) / trials;
    EXPECT_NEAR(freq, 1.0 / 7.0, 0.02) << "green count " << g;
  }
}

TEST(SpawnCluster, ImpossibleSeparationRaisesSpawnError) {
  WorldConfig cfg;
  cfg.min_anchor_separation = 0.5;  // cannot fit several anchors in the box
  RandomizationConfig rand;
  rand.green_min = rand.green_max = 4;
  EXPECT_THROW(spawn_cluster(cfg, rand, 1), SpawnError);
}

TEST(RandomizationConfig, ValidateRejectsBadRanges) {
  RandomizationConfig rand;
  rand.green_min = 5;
  rand.green_max = 2;
  EXPECT_THROW(rand.validate(), ContractViolation);
  RandomizationConfig rand2;
  rand2.anchor_jitter = -0.1;
  EXPECT_THROW(rand2.validate(), ContractViolation);
}

}  // namespace
}  // namespace stempick
