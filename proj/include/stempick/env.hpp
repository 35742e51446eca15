#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stempick/core.hpp"
#include "stempick/impedance.hpp"
#include "stempick/render.hpp"
#include "stempick/reward.hpp"
#include "stempick/rng.hpp"
#include "stempick/world.hpp"

namespace stempick {

// Policy action, all components in [-1, 1]:
//   [0..2] TCP reference translation, scaled to meters
//   [3..5] TCP reference rotation (axis-angle), scaled to radians
//   [6]    gripper: > 0 close, <= 0 open
constexpr int kActionDim = 7;

// 18-dim proprioceptive state:
//   [0..2] TCP position, [3..6] orientation quaternion (w,x,y,z, w >= 0),
//   [7..9] linear velocity, [10..12] angular velocity,
//   [13] normalized finger width, [14..17] finger-state one-hot
constexpr int kStateDim = 18;

struct Observation {
  VecX state;                 // kStateDim
  std::vector<Image> views;   // [wrist_down, wrist_up]
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  RewardTerms terms;
  bool terminated = false;
  bool truncated = false;
  bool success = false;
};

struct EnvConfig {
  WorldConfig world;
  RandomizationConfig randomization;
  ImpedanceGains gains;
  CameraConfig camera;
  Pose camera_down_mount = wrist_camera_pose(0.35, Vec3(-0.02, 0.0, 0.04));
  Pose camera_up_mount = wrist_camera_pose(-0.35, Vec3(-0.02, 0.0, -0.04));
  double pos_action_scale = 0.01;   // m per unit action, per step
  double rot_action_scale = 0.05;   // rad per unit action, per step
  Vec3 workspace_min = Vec3(0.10, -0.30, 0.15);
  Vec3 workspace_max = Vec3(0.55, 0.30, 0.60);
  int max_steps = 300;
  int control_ticks_per_step = 50;  // 20 Hz policy over a 1 kHz loop
  double control_dt = 1e-3;
  RewardWeights reward_weights;

  void validate() const {
    randomization.validate();
    gains.validate();
    camera.validate();
    if (max_steps <= 0 || control_ticks_per_step <= 0 || control_dt <= 0)
      throw ContractViolation("step/tick counts and dt must be positive");
    if (pos_action_scale <= 0 || rot_action_scale <= 0)
      throw ContractViolation("action scales must be positive");
    if ((workspace_max - workspace_min).minCoeff() <= 0)
      throw ContractViolation("workspace box is empty");
  }
};

// Gains tuned for the floating gripper body (critically damped at its
// apparent mass/inertia).
inline EnvConfig default_env_config() {
  EnvConfig cfg;
  cfg.gains.kp << 1000, 1000, 1000, 50, 50, 50;
  const double m = cfg.world.gripper.apparent_mass;
  const double i = cfg.world.gripper.apparent_inertia;
  for (int k = 0; k < 3; ++k) {
    cfg.gains.kd[k] = 2.0 * std::sqrt(cfg.gains.kp[k] * m);
    cfg.gains.kd[k + 3] = 2.0 * std::sqrt(cfg.gains.kp[k + 3] * i);
  }
  return cfg;
}

class PickEnv {
 public:
  PickEnv(EnvConfig config, std::uint64_t seed)
      : cfg_(std::move(config)), rng_(seed) {
    cfg_.validate();
  }

  const EnvConfig& config() const { return cfg_; }
  int step_count() const { return step_count_; }
  int target_id() const { return target_id_; }
  const World& world() const { return *world_; }
  const Pose& reference_pose() const { return reference_; }

  Observation reset() {
    world_.emplace(spawn_cluster(cfg_.world, cfg_.randomization, rng_.next_u64()));
    target_id_ = first_red_id();

    GripperBody& g = world_->gripper();
    const double j = cfg_.randomization.start_pose_jitter;
    if (j > 0)
      for (int ax = 0; ax < 3; ++ax)
        g.pose.position[ax] += rng_.uniform(-j, j);
    reference_ = g.pose;

    sample_episode_noise();
    prev_action_ = VecX::Zero(kActionDim);
    step_count_ = 0;
    success_ = false;
    done_ = false;
    return observe();
  }

  StepResult step(const VecX& action_in) {
    if (!world_) throw ContractViolation("step before reset");
    if (done_) throw ContractViolation("step after episode end");
    if (action_in.size() != kActionDim)
      throw ContractViolation("action must have 7 components");

    VecX action = action_in;
    for (int i = 0; i < kActionDim; ++i) action[i] = clamp(action[i], -1.0, 1.0);

    // advance the impedance reference, kept inside the workspace box
    reference_.position += cfg_.pos_action_scale * action.segment<3>(0);
    for (int ax = 0; ax < 3; ++ax)
      reference_.position[ax] =
          clamp(reference_.position[ax], cfg_.workspace_min[ax], cfg_.workspace_max[ax]);
    reference_.orientation =
        (quat_exp(cfg_.rot_action_scale * action.segment<3>(3)) * reference_.orientation)
            .normalized();

    const auto wrench_fn = [this](const World& w) {
      ControlCommand cmd{reference_, Wrench{}};
      return impedance_wrench(cfg_.gains, w.gripper().pose, w.gripper().twist, cmd);
    };
    for (int t = 0; t < cfg_.control_ticks_per_step; ++t)
      world_->step_physics(wrench_fn(*world_), cfg_.control_dt);

    // the grasp command always runs to completion inside the step
    const GripperCommand cmd =
        action[6] > 0.0 ? GripperCommand::close : GripperCommand::open;
    world_->execute_gripper(cmd, wrench_fn, cfg_.control_dt);

    StepResult out;
    out.terms = compute_reward(*world_, target_id_, action, prev_action_,
                               cfg_.reward_weights);
    out.reward = out.terms.total;
    if (out.terms.grasp > 0.5) {
      // a grasped red is picked: it leaves the scene, and the episode ends
      // once no reds remain
      success_ = true;
      world_->remove_strawberry(target_id_);
      if (world_->remaining_red_count() > 0) target_id_ = first_red_id();
    }
    out.success = success_;

    ++step_count_;
    out.terminated = world_->remaining_red_count() == 0;
    out.truncated = !out.terminated && step_count_ >= cfg_.max_steps;
    done_ = out.terminated || out.truncated;

    prev_action_ = action;
    out.obs = observe();
    return out;
  }

  Observation observe() {
    Observation obs;
    obs.state = state_vector();
    obs.views.reserve(2);
    for (int v = 0; v < 2; ++v) {
      const Pose mount = v == 0 ? cfg_.camera_down_mount : cfg_.camera_up_mount;
      const Pose noisy{mount.position + camera_noise_[v].position,
                       (camera_noise_[v].orientation * mount.orientation).normalized()};
      const Pose& g = world_->gripper().pose;
      const Pose cam_world{g.position + g.orientation * noisy.position,
                           (g.orientation * noisy.orientation).normalized()};
      Image img = render_view(*world_, cam_world, cfg_.camera);
      apply_image_noise(img, brightness_, cfg_.randomization.pixel_noise_sigma, rng_);
      obs.views.push_back(std::move(img));
    }
    return obs;
  }

 private:
  int first_red_id() const {
    for (const auto& s : world_->strawberries())
      if (s.color == BerryColor::red && !s.removed) return s.id;
    throw ContractViolation("no red strawberry in cluster");
  }

  void sample_episode_noise() {
    const RandomizationConfig& rc = cfg_.randomization;
    for (int v = 0; v < 2; ++v) {
      Vec3 dp = Vec3::Zero(), dr = Vec3::Zero();
      for (int ax = 0; ax < 3; ++ax) {
        dp[ax] = rng_.normal(0.0, rc.camera_pos_noise);
        dr[ax] = rng_.normal(0.0, rc.camera_rot_noise);
      }
      camera_noise_[v] = Pose{dp, quat_exp(dr)};
    }
    brightness_ = rng_.uniform(rc.brightness_min, rc.brightness_max);
  }

  VecX state_vector() {
    const GripperBody& g = world_->gripper();
    const StateNoise& n = cfg_.randomization.state_noise;
    VecX s = VecX::Zero(kStateDim);

    Vec3 pos = g.pose.position;
    Quat q = g.pose.orientation;
    Vec3 lin = g.twist.linear, ang = g.twist.angular;
    double width = g.finger_width / cfg_.world.gripper.max_width;
    for (int ax = 0; ax < 3; ++ax) {
      pos[ax] += rng_.normal(0.0, n.pos);
      lin[ax] += rng_.normal(0.0, n.vel);
      ang[ax] += rng_.normal(0.0, n.vel);
    }
    if (n.quat > 0) {
      Vec3 dq;
      for (int ax = 0; ax < 3; ++ax) dq[ax] = rng_.normal(0.0, n.quat);
      q = (quat_exp(dq) * q).normalized();
    }
    width = clamp(width + rng_.normal(0.0, n.width), 0.0, 1.0);
    if (q.w() < 0) q.coeffs() *= -1.0;

    s.segment<3>(0) = pos;
    s[3] = q.w();
    s[4] = q.x();
    s[5] = q.y();
    s[6] = q.z();
    s.segment<3>(7) = lin;
    s.segment<3>(10) = ang;
    s[13] = width;
    const int state_index = static_cast<int>(g.finger_state);
    s[14 + state_index] = 1.0;
    return s;
  }

  EnvConfig cfg_;
  Rng rng_;
  std::optional<World> world_;
  Pose reference_;
  VecX prev_action_;
  Pose camera_noise_[2];
  double brightness_ = 1.0;
  int target_id_ = 0;
  int step_count_ = 0;
  bool success_ = false;
  bool done_ = true;
};

}  // namespace stempick
