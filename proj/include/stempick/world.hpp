#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <tuple>
#include <vector>

#include "stempick/core.hpp"
#include "stempick/geometry.hpp"
#include "stempick/rng.hpp"

namespace stempick {

enum class BerryColor { red, green };

struct Strawberry {
  int id = 0;
  BerryColor color = BerryColor::red;
  Vec3 anchor = Vec3::Zero();          // fixed stem attachment point
  double stem_rest_length = 0.10;      // anchor to fruit center, unloaded
  double stem_stiffness = 150.0;       // N/m
  double stem_damping = 0.05;          // N s/m, isotropic on the fruit
  double fruit_radius = 0.015;
  double fruit_mass = 0.015;
  Vec3 position = Vec3::Zero();        // fruit center
  Vec3 velocity = Vec3::Zero();
  Vec3 initial_position = Vec3::Zero();
  bool removed = false;
};

enum class FingerState { open, closed, moving_open, moving_closed };

struct GripperBody {
  Pose pose;                 // TCP
  Twist twist;
  double apparent_mass = 2.0;
  double apparent_inertia = 0.05;
  double finger_width = 0.08;
  FingerState finger_state = FingerState::open;
  double finger_speed = 0.2;
  std::optional<int> attached_id;
  Vec3 attach_local = Vec3::Zero();  // held fruit center in gripper frame
};

// Gripper frame: x forward (approach), y grasp axis, z up. The inner face of
// each finger is the plane y = +/- width/2; the face is carried by a thin box.
struct GripperGeometry {
  double max_width = 0.08;
  double finger_speed = 0.2;
  double apparent_mass = 2.0;
  double apparent_inertia = 0.05;
  double finger_thickness = 0.004;
  double finger_half_len = 0.020;     // x
  double finger_half_height = 0.015;  // z
  double finger_forward = 0.030;      // box center ahead of the TCP
};

struct StrawberryParams {
  double stem_rest_length = 0.10;
  double stem_stiffness = 150.0;
  double stem_damping = 0.05;
  double fruit_radius = 0.015;
  double fruit_mass = 0.015;
  double stem_radius = 0.002;  // collision capsule radius
};

struct WorldConfig {
  Vec3 gravity = Vec3(0, 0, -9.81);
  StrawberryParams berry;
  GripperGeometry gripper;
  double contact_stiffness = 5000.0;
  double contact_damping = 50.0;
  double contact_epsilon = 1e-4;
  Vec3 cluster_min = Vec3(0.35, -0.08, 0.45);
  Vec3 cluster_max = Vec3(0.45, 0.08, 0.52);
  double min_anchor_separation = 0.035;
  int red_count = 1;
  int max_spawn_attempts = 1000;
  double pick_point_fraction = 1.0 / 3.0;  // up the stem from the fruit top
  double max_fruit_speed = 10.0;           // teleport guard
  Pose gripper_start = Pose{Vec3(0.20, 0.0, 0.43), Quat::Identity()};
};

// Everything the observation/spawn randomization can touch.
struct StateNoise {
  double pos = 0.0;
  double quat = 0.0;
  double vel = 0.0;
  double width = 0.0;
};

struct RandomizationConfig {
  int green_min = 1;
  int green_max = 7;
  double anchor_jitter = 0.01;       // m, added on top of region sampling
  double camera_pos_noise = 0.0;     // sigma, m
  double camera_rot_noise = 0.0;     // sigma, rad
  double brightness_min = 1.0;       // multiplicative jitter range
  double brightness_max = 1.0;
  double pixel_noise_sigma = 0.0;
  StateNoise state_noise;
  double start_pose_jitter = 0.0;    // m, TCP start position

  void validate() const {
    if (green_min > green_max || green_min < 0)
      throw ContractViolation("green count range invalid");
    if (anchor_jitter < 0 || camera_pos_noise < 0 || camera_rot_noise < 0 ||
        pixel_noise_sigma < 0 || brightness_min > brightness_max)
      throw ContractViolation("randomization sigmas must be non-negative, ranges ordered");
  }
};

struct SpawnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Contacts

struct SurfaceId {
  enum class Kind : int { left_finger_inner = 0, right_finger_inner = 1, stem = 2, fruit = 3 };
  Kind kind;
  int index = -1;  // strawberry id for stem/fruit

  friend bool operator==(const SurfaceId&, const SurfaceId&) = default;
  friend auto operator<=>(const SurfaceId& a, const SurfaceId& b) {
    return std::tie(a.kind, a.index) <=> std::tie(b.kind, b.index);
  }
};

inline SurfaceId left_finger() { return {SurfaceId::Kind::left_finger_inner, -1}; }
inline SurfaceId right_finger() { return {SurfaceId::Kind::right_finger_inner, -1}; }
inline SurfaceId stem_surface(int id) { return {SurfaceId::Kind::stem, id}; }
inline SurfaceId fruit_surface(int id) { return {SurfaceId::Kind::fruit, id}; }

class ContactSet {
 public:
  void add(SurfaceId x, SurfaceId y) {
    if (y < x) std::swap(x, y);
    pairs_.push_back({x, y});
  }
  bool contains(SurfaceId x, SurfaceId y) const {
    if (y < x) std::swap(x, y);
    return std::find(pairs_.begin(), pairs_.end(), std::pair{x, y}) != pairs_.end();
  }
  size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<std::pair<SurfaceId, SurfaceId>>& pairs() const { return pairs_; }

 private:
  std::vector<std::pair<SurfaceId, SurfaceId>> pairs_;
};

// Eq-style exclusive grasp test: both inner faces on the target stem and
// every contacted surface belongs to the target strawberry.
inline bool exclusive_stem_grasp(const ContactSet& contacts, int target_id) {
  bool left_on_stem = false, right_on_stem = false;
  for (const auto& [a, b] : contacts.pairs()) {
    // canonical order puts the finger first
    if (b.index != target_id) return false;
    if (b.kind == SurfaceId::Kind::stem) {
      if (a.kind == SurfaceId::Kind::left_finger_inner) left_on_stem = true;
      if (a.kind == SurfaceId::Kind::right_finger_inner) right_on_stem = true;
    }
  }
  return left_on_stem && right_on_stem;
}

enum class GripperCommand { close, open };

// ---------------------------------------------------------------------------

class World {
 public:
  using WrenchProvider = std::function<Wrench(const World&)>;

  World(WorldConfig config, std::vector<Strawberry> berries, GripperBody gripper,
        std::uint64_t seed)
      : config_(std::move(config)),
        berries_(std::move(berries)),
        gripper_(gripper),
        rng_(seed) {}

  const WorldConfig& config() const { return config_; }
  const std::vector<Strawberry>& strawberries() const { return berries_; }
  std::vector<Strawberry>& strawberries() { return berries_; }
  const GripperBody& gripper() const { return gripper_; }
  GripperBody& gripper() { return gripper_; }
  double time() const { return time_; }
  Rng& rng() { return rng_; }

  OrientedBox finger_box(bool left) const {
    const GripperGeometry& g = config_.gripper;
    const double y = (gripper_.finger_width + g.finger_thickness) / 2.0;
    OrientedBox box;
    box.orientation = gripper_.pose.orientation;
    box.center = gripper_.pose.position +
                 gripper_.pose.orientation *
                     Vec3(g.finger_forward, left ? y : -y, 0.0);
    box.half_extents =
        Vec3(g.finger_half_len, g.finger_thickness / 2.0, g.finger_half_height);
    return box;
  }

  // Point between the fingertips: what should land on the picking point.
  Vec3 grasp_center() const {
    return gripper_.pose.position +
           gripper_.pose.orientation * Vec3(config_.gripper.finger_forward, 0.0, 0.0);
  }

  // Stem collision capsule: anchor down to the point where it meets the fruit.
  std::pair<Vec3, Vec3> stem_segment(const Strawberry& s) const {
    const Vec3 d = s.anchor - s.position;
    const double len = d.norm();
    const Vec3 fruit_top =
        len > 1e-12 ? Vec3(s.position + s.fruit_radius * (d / len)) : s.position;
    return {s.anchor, fruit_top};
  }

  Vec3 picking_point(int id) const {
    const Strawberry& s = berry(id);
    const auto [anchor, fruit_top] = stem_segment(s);
    return fruit_top + config_.pick_point_fraction * (anchor - fruit_top);
  }

  const Strawberry& berry(int id) const {
    for (const auto& s : berries_)
      if (s.id == id) return s;
    throw ContractViolation("unknown strawberry id");
  }

  void step_physics(const Wrench& tcp_wrench, double dt) {
    step_gripper(tcp_wrench, dt);
    for (auto& s : berries_) {
      if (s.removed) continue;
      if (gripper_.attached_id && *gripper_.attached_id == s.id) {
        slave_to_gripper(s);
        continue;
      }
      step_fruit(s, dt);
    }
    time_ += dt;
  }

  ContactSet detect_contacts() const {
    ContactSet out;
    const double eps = config_.contact_epsilon;
    for (int side = 0; side < 2; ++side) {
      const bool left = side == 0;
      const OrientedBox box = finger_box(left);
      const SurfaceId finger = left ? left_finger() : right_finger();
      for (const auto& s : berries_) {
        if (s.removed) continue;
        const auto [a, b] = stem_segment(s);
        if (capsule_box_distance(box, a, b, config_.berry.stem_radius) < eps)
          out.add(finger, stem_surface(s.id));
        if (sphere_box_distance(box, s.position, s.fruit_radius) < eps)
          out.add(finger, fruit_surface(s.id));
      }
    }
    return out;
  }

  // Runs the finger stroke to completion at the physics rate. Returns the
  // number of 1 kHz ticks consumed (0 if already in the commanded state).
  int execute_gripper(GripperCommand cmd, const WrenchProvider& wrench = {},
                      double dt = 1e-3) {
    const GripperGeometry& g = config_.gripper;
    if (cmd == GripperCommand::close && gripper_.finger_state == FingerState::closed)
      return 0;
    if (cmd == GripperCommand::open && gripper_.finger_state == FingerState::open)
      return 0;

    const bool closing = cmd == GripperCommand::close;
    gripper_.finger_state = closing ? FingerState::moving_closed : FingerState::moving_open;
    if (!closing) gripper_.attached_id.reset();

    const int max_ticks = static_cast<int>(std::lround(0.6 / dt));
    int ticks = 0;
    while (ticks < max_ticks) {
      const double delta = gripper_.finger_speed * dt;
      gripper_.finger_width = closing
                                  ? std::max(0.0, gripper_.finger_width - delta)
                                  : std::min(g.max_width, gripper_.finger_width + delta);
      step_physics(wrench ? wrench(*this) : Wrench{}, dt);
      ++ticks;

      if (closing) {
        if (try_latch_stem()) break;
        if (gripper_.finger_width <= 0.0) {
          gripper_.finger_state = FingerState::closed;
          break;
        }
      } else if (gripper_.finger_width >= g.max_width) {
        gripper_.finger_state = FingerState::open;
        break;
      }
    }
    if (gripper_.finger_state == FingerState::moving_closed)
      gripper_.finger_state = FingerState::closed;
    if (gripper_.finger_state == FingerState::moving_open)
      gripper_.finger_state = FingerState::open;
    return ticks;
  }

  void remove_strawberry(int id) {
    for (auto& s : berries_) {
      if (s.id != id) continue;
      if (s.color != BerryColor::red)
        throw ContractViolation("only red strawberries are removable");
      if (s.removed) throw ContractViolation("strawberry already removed");
      s.removed = true;
      s.velocity.setZero();
      if (gripper_.attached_id && *gripper_.attached_id == id)
        gripper_.attached_id.reset();
      return;
    }
    throw ContractViolation("unknown strawberry id");
  }

  int remaining_red_count() const {
    int n = 0;
    for (const auto& s : berries_)
      if (s.color == BerryColor::red && !s.removed) ++n;
    return n;
  }

  // Kinetic + stem strain + gravitational potential of the free fruit.
  double mechanical_energy() const {
    double e = 0.0;
    for (const auto& s : berries_) {
      if (s.removed) continue;
      e += 0.5 * s.fruit_mass * s.velocity.squaredNorm();
      const double stretch = (s.position - s.anchor).norm() - s.stem_rest_length;
      e += 0.5 * s.stem_stiffness * stretch * stretch;
      e -= s.fruit_mass * config_.gravity.dot(s.position);
    }
    return e;
  }

 private:
  void step_gripper(const Wrench& w, double dt) {
    GripperBody& g = gripper_;
    g.twist.linear += (w.force / g.apparent_mass) * dt;
    g.twist.angular += (w.torque / g.apparent_inertia) * dt;
    g.pose.position += g.twist.linear * dt;
    g.pose.orientation =
        (quat_exp(g.twist.angular * dt) * g.pose.orientation).normalized();
    if (!g.pose.position.allFinite() || !g.twist.linear.allFinite())
      throw SimulationDiverged("gripper state non-finite");
  }

  void step_fruit(Strawberry& s, double dt) {
    Vec3 force = s.fruit_mass * config_.gravity;
    const Vec3 d = s.position - s.anchor;
    const double len = d.norm();
    if (len > 1e-12) {
      const Vec3 u = d / len;
      force += -s.stem_stiffness * (len - s.stem_rest_length) * u;
    }

    struct NormalContact {
      Vec3 normal;
      Vec3 box_point_velocity;
      double lever;  // fraction of the contact force reaching the fruit
    };
    std::vector<NormalContact> actives;
    for (int side = 0; side < 2; ++side) {
      const OrientedBox box = finger_box(side == 0);
      // fruit sphere against the finger
      const Penetration pen = sphere_box_penetration(box, s.position, s.fruit_radius);
      if (pen.overlapping) {
        force += config_.contact_stiffness * pen.depth * pen.normal;
        actives.push_back({pen.normal, box_point_velocity(pen.contact_point), 1.0});
      }
      // stem capsule against the finger; force reaches the fruit scaled by
      // the lever arm from the fixed anchor
      const auto [a, b] = stem_segment(s);
      double t = 0.0;
      const double dist = segment_box_distance(box, a, b, &t);
      if (dist < config_.berry.stem_radius) {
        const Vec3 seg_point = a + t * (b - a);
        const Vec3 cp = closest_point_on_box(box, seg_point);
        Vec3 n = seg_point - cp;
        const double nn = n.norm();
        if (nn > 1e-12) {
          n /= nn;
          const double depth = config_.berry.stem_radius - dist;
          force += t * config_.contact_stiffness * depth * n;
          actives.push_back({n, box_point_velocity(cp), t});
        }
      }
    }

    s.velocity += (force / s.fruit_mass) * dt;
    // exponential (unconditionally stable) treatment of viscous terms
    s.velocity *= std::exp(-s.stem_damping * dt / s.fruit_mass);
    const double contact_keep = std::exp(-config_.contact_damping * dt / s.fruit_mass);
    for (const auto& c : actives) {
      const double vn = c.normal.dot(s.velocity - c.box_point_velocity) * c.lever;
      s.velocity -= c.normal * vn * (1.0 - contact_keep);
    }
    s.position += s.velocity * dt;

    if (!s.position.allFinite() || !s.velocity.allFinite())
      throw SimulationDiverged("fruit state non-finite");
    if (s.velocity.norm() > config_.max_fruit_speed)
      throw SimulationDiverged("fruit speed exceeded guard");
  }

  Vec3 box_point_velocity(const Vec3& p) const {
    return gripper_.twist.linear +
           gripper_.twist.angular.cross(p - gripper_.pose.position);
  }

  void slave_to_gripper(Strawberry& s) {
    s.position = gripper_.pose.position + gripper_.pose.orientation * gripper_.attach_local;
    s.velocity = box_point_velocity(s.position);
  }

  // While closing: stop once both inner faces hold a common stem; attach only
  // if that stem is the single contacted one.
  bool try_latch_stem() {
    const ContactSet contacts = detect_contacts();
    std::vector<int> left_stems, right_stems, all_stems;
    for (const auto& [a, b] : contacts.pairs()) {
      if (b.kind != SurfaceId::Kind::stem) continue;
      all_stems.push_back(b.index);
      if (a.kind == SurfaceId::Kind::left_finger_inner) left_stems.push_back(b.index);
      if (a.kind == SurfaceId::Kind::right_finger_inner) right_stems.push_back(b.index);
    }
    int common = -1;
    for (int id : left_stems)
      if (std::find(right_stems.begin(), right_stems.end(), id) != right_stems.end()) {
        common = id;
        break;
      }
    if (common < 0) return false;

    gripper_.finger_state = FingerState::closed;
    std::sort(all_stems.begin(), all_stems.end());
    all_stems.erase(std::unique(all_stems.begin(), all_stems.end()), all_stems.end());
    if (all_stems.size() == 1) {
      gripper_.attached_id = common;
      Strawberry& held = const_cast<Strawberry&>(berry(common));
      gripper_.attach_local =
          gripper_.pose.orientation.inverse() * (held.position - gripper_.pose.position);
    }
    return true;
  }

  WorldConfig config_;
  std::vector<Strawberry> berries_;
  GripperBody gripper_;
  double time_ = 0.0;
  Rng rng_;
};

// ---------------------------------------------------------------------------

inline Strawberry make_strawberry(int id, BerryColor color, const Vec3& anchor,
                                  const WorldConfig& cfg) {
  Strawberry s;
  s.id = id;
  s.color = color;
  s.anchor = anchor;
  s.stem_rest_length = cfg.berry.stem_rest_length;
  s.stem_stiffness = cfg.berry.stem_stiffness;
  s.stem_damping = cfg.berry.stem_damping;
  s.fruit_radius = cfg.berry.fruit_radius;
  s.fruit_mass = cfg.berry.fruit_mass;
  // hang at the gravity-loaded equilibrium so spawn is transient-free
  Vec3 down(0, 0, -1);
  double sag = 0.0;
  const double gmag = cfg.gravity.norm();
  if (gmag > 0) {
    down = cfg.gravity / gmag;
    sag = s.fruit_mass * gmag / s.stem_stiffness;
  }
  s.position = anchor + (s.stem_rest_length + sag) * down;
  s.velocity.setZero();
  s.initial_position = s.position;
  return s;
}

inline World spawn_cluster(const WorldConfig& world_cfg,
                           const RandomizationConfig& rand_cfg, std::uint64_t seed) {
  rand_cfg.validate();
  Rng rng(seed);
  const int greens = rng.uniform_int(rand_cfg.green_min, rand_cfg.green_max);
  const int total = world_cfg.red_count + greens;

  std::vector<Vec3> anchors;
  anchors.reserve(static_cast<size_t>(total));
  for (int k = 0; k < total; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < world_cfg.max_spawn_attempts; ++attempt) {
      Vec3 p;
      for (int ax = 0; ax < 3; ++ax)
        p[ax] = rng.uniform(world_cfg.cluster_min[ax], world_cfg.cluster_max[ax]);
      for (int ax = 0; ax < 3; ++ax)
        p[ax] += rng.uniform(-rand_cfg.anchor_jitter, rand_cfg.anchor_jitter);
      bool ok = true;
      for (const auto& q : anchors)
        if ((p - q).norm() < world_cfg.min_anchor_separation) {
          ok = false;
          break;
        }
      if (ok) {
        anchors.push_back(p);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw SpawnError("could not place anchors with the required separation");
  }

  std::vector<Strawberry> berries;
  berries.reserve(static_cast<size_t>(total));
  for (int k = 0; k < total; ++k) {
    const BerryColor color = k < world_cfg.red_count ? BerryColor::red : BerryColor::green;
    berries.push_back(make_strawberry(k, color, anchors[static_cast<size_t>(k)], world_cfg));
  }

  GripperBody gripper;
  gripper.pose = world_cfg.gripper_start;
  gripper.apparent_mass = world_cfg.gripper.apparent_mass;
  gripper.apparent_inertia = world_cfg.gripper.apparent_inertia;
  gripper.finger_width = world_cfg.gripper.max_width;
  gripper.finger_speed = world_cfg.gripper.finger_speed;
  gripper.finger_state = FingerState::open;

  return World(world_cfg, std::move(berries), gripper, rng.next_u64());
}

}  // namespace stempick
