#pragma once

#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "stempick/agent.hpp"
#include "stempick/core.hpp"
#include "stempick/env.hpp"
#include "stempick/kinematics.hpp"

namespace stempick {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace cfgdetail {

inline Vec3 vec3(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 3) throw ConfigError("expected a 3-vector");
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

inline Vec6 vec6(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 6) throw ConfigError("expected a 6-vector");
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = n[static_cast<size_t>(i)].as<double>();
  return v;
}

inline VecX vecx(const YAML::Node& n) {
  if (!n.IsSequence()) throw ConfigError("expected a sequence");
  VecX v(static_cast<Eigen::Index>(n.size()));
  for (size_t i = 0; i < n.size(); ++i) v[static_cast<Eigen::Index>(i)] = n[i].as<double>();
  return v;
}

// roll-pitch-yaw to quaternion, extrinsic x-y-z (URDF convention)
inline Quat quat_rpy(double r, double p, double y) {
  return Quat(Eigen::AngleAxisd(y, Vec3::UnitZ()) * Eigen::AngleAxisd(p, Vec3::UnitY()) *
              Eigen::AngleAxisd(r, Vec3::UnitX()));
}

inline Quat quat(const YAML::Node& n) {
  if (n["rpy"]) {
    const Vec3 v = vec3(n["rpy"]);
    return quat_rpy(v[0], v[1], v[2]);
  }
  if (n["quat"]) {
    const YAML::Node q = n["quat"];
    if (!q.IsSequence() || q.size() != 4) throw ConfigError("quat needs [w,x,y,z]");
    return Quat(q[0].as<double>(), q[1].as<double>(), q[2].as<double>(),
                q[3].as<double>())
        .normalized();
  }
  return Quat::Identity();
}

inline Pose pose(const YAML::Node& n, const Pose& base) {
  Pose p = base;
  if (n["position"]) p.position = vec3(n["position"]);
  p.orientation = n["rpy"] || n["quat"] ? quat(n) : base.orientation;
  return p;
}

template <typename T>
void get(const YAML::Node& n, const char* key, T& out) {
  if (n[key]) out = n[key].as<T>();
}

inline void get_vec3(const YAML::Node& n, const char* key, Vec3& out) {
  if (n[key]) out = vec3(n[key]);
}

}  // namespace cfgdetail

// ---------------------------------------------------------------------------
// 7-DoF arm with Panda-like link offsets; joint axes are all local z.

inline ArmModel default_arm_model() {
  using cfgdetail::quat_rpy;
  const double pi = M_PI;
  std::vector<RevoluteJoint> joints(7);
  joints[0].origin = Vec3(0, 0, 0.333);
  joints[1].fixed_rotation = quat_rpy(-pi / 2, 0, 0);
  joints[2].origin = Vec3(0, -0.316, 0);
  joints[2].fixed_rotation = quat_rpy(pi / 2, 0, 0);
  joints[3].origin = Vec3(0.0825, 0, 0);
  joints[3].fixed_rotation = quat_rpy(pi / 2, 0, 0);
  joints[4].origin = Vec3(-0.0825, 0.384, 0);
  joints[4].fixed_rotation = quat_rpy(-pi / 2, 0, 0);
  joints[5].fixed_rotation = quat_rpy(pi / 2, 0, 0);
  joints[6].origin = Vec3(0.088, 0, 0);
  joints[6].fixed_rotation = quat_rpy(pi / 2, 0, 0);
  RigidTransform ee;
  ee.translation = Vec3(0, 0, 0.107);
  VecX rest(7);
  rest << 0, -pi / 4, 0, -3 * pi / 4, 0, pi / 2, pi / 4;
  return ArmModel(std::move(joints), ee, rest);
}

inline ArmModel arm_model_from_yaml(const YAML::Node& n) {
  if (!n || !n.IsDefined() || n.IsNull()) return default_arm_model();
  using namespace cfgdetail;
  std::vector<RevoluteJoint> joints;
  for (const auto& jn : n["joints"]) {
    RevoluteJoint j;
    if (jn["axis"]) j.axis = vec3(jn["axis"]);
    if (jn["origin"]) j.origin = vec3(jn["origin"]);
    j.fixed_rotation = quat(jn);
    joints.push_back(j);
  }
  RigidTransform ee;
  if (n["ee_offset"]) ee.translation = vec3(n["ee_offset"]);
  VecX rest = n["rest_posture"] ? vecx(n["rest_posture"])
                                : VecX::Zero(static_cast<Eigen::Index>(joints.size()));
  return ArmModel(std::move(joints), ee, rest);
}

inline ImpedanceGains gains_from_yaml(const YAML::Node& n, ImpedanceGains base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  ImpedanceGains g = base;
  if (n["kp"]) g.kp = vec6(n["kp"]);
  if (n["kd"]) g.kd = vec6(n["kd"]);
  if (n["clip_delta"]) g.clip_delta = vec6(n["clip_delta"]);
  get(n, "nullspace_stiffness", g.nullspace_stiffness);
  get(n, "nullspace_damping", g.nullspace_damping);
  return g;
}

inline WorldConfig world_config_from_yaml(const YAML::Node& n, WorldConfig base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  WorldConfig w = base;
  get_vec3(n, "gravity", w.gravity);
  if (const YAML::Node b = n["berry"]; b) {
    get(b, "stem_rest_length", w.berry.stem_rest_length);
    get(b, "stem_stiffness", w.berry.stem_stiffness);
    get(b, "stem_damping", w.berry.stem_damping);
    get(b, "fruit_radius", w.berry.fruit_radius);
    get(b, "fruit_mass", w.berry.fruit_mass);
    get(b, "stem_radius", w.berry.stem_radius);
  }
  if (const YAML::Node g = n["gripper"]; g) {
    get(g, "max_width", w.gripper.max_width);
    get(g, "finger_speed", w.gripper.finger_speed);
    get(g, "apparent_mass", w.gripper.apparent_mass);
    get(g, "apparent_inertia", w.gripper.apparent_inertia);
    get(g, "finger_thickness", w.gripper.finger_thickness);
    get(g, "finger_half_len", w.gripper.finger_half_len);
    get(g, "finger_half_height", w.gripper.finger_half_height);
    get(g, "finger_forward", w.gripper.finger_forward);
  }
  get(n, "contact_stiffness", w.contact_stiffness);
  get(n, "contact_damping", w.contact_damping);
  get(n, "contact_epsilon", w.contact_epsilon);
  get_vec3(n, "cluster_min", w.cluster_min);
  get_vec3(n, "cluster_max", w.cluster_max);
  get(n, "min_anchor_separation", w.min_anchor_separation);
  get(n, "red_count", w.red_count);
  get(n, "max_spawn_attempts", w.max_spawn_attempts);
  get(n, "pick_point_fraction", w.pick_point_fraction);
  get(n, "max_fruit_speed", w.max_fruit_speed);
  if (n["gripper_start"]) w.gripper_start = pose(n["gripper_start"], base.gripper_start);
  return w;
}

inline RandomizationConfig randomization_from_yaml(const YAML::Node& n,
                                                   RandomizationConfig base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  RandomizationConfig r = base;
  get(n, "green_min", r.green_min);
  get(n, "green_max", r.green_max);
  get(n, "anchor_jitter", r.anchor_jitter);
  get(n, "camera_pos_noise", r.camera_pos_noise);
  get(n, "camera_rot_noise", r.camera_rot_noise);
  get(n, "brightness_min", r.brightness_min);
  get(n, "brightness_max", r.brightness_max);
  get(n, "pixel_noise_sigma", r.pixel_noise_sigma);
  get(n, "start_pose_jitter", r.start_pose_jitter);
  if (const YAML::Node s = n["state_noise"]; s) {
    get(s, "pos", r.state_noise.pos);
    get(s, "quat", r.state_noise.quat);
    get(s, "vel", r.state_noise.vel);
    get(s, "width", r.state_noise.width);
  }
  return r;
}

inline CameraConfig camera_from_yaml(const YAML::Node& n, CameraConfig base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  CameraConfig c = base;
  get(n, "width", c.width);
  get(n, "height", c.height);
  get(n, "ortho_half_width", c.ortho_half_width);
  get(n, "near", c.near);
  get(n, "far", c.far);
  return c;
}

inline EnvConfig env_config_from_yaml(const YAML::Node& n, EnvConfig base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  EnvConfig e = base;
  e.world = world_config_from_yaml(n["world"], base.world);
  e.randomization = randomization_from_yaml(n["randomization"], base.randomization);
  e.gains = gains_from_yaml(n["gains"], base.gains);
  e.camera = camera_from_yaml(n["camera"], base.camera);
  get(n, "pos_action_scale", e.pos_action_scale);
  get(n, "rot_action_scale", e.rot_action_scale);
  get_vec3(n, "workspace_min", e.workspace_min);
  get_vec3(n, "workspace_max", e.workspace_max);
  get(n, "max_steps", e.max_steps);
  get(n, "control_ticks_per_step", e.control_ticks_per_step);
  get(n, "control_dt", e.control_dt);
  if (const YAML::Node w = n["reward_weights"]; w) {
    get(w, "grasp", e.reward_weights.grasp);
    get(w, "proximity", e.reward_weights.proximity);
    get(w, "green_keep", e.reward_weights.green_keep);
    get(w, "effort", e.reward_weights.effort);
    get(w, "smoothness", e.reward_weights.smoothness);
  }
  return e;
}

// ---------------------------------------------------------------------------

struct RunConfig {
  Algo algo = Algo::drm;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  long total_steps = 200000;
  long eval_every = 10000;
  int eval_trials = 30;
  long warmup_steps = 2000;
  int eval_greens = 0;          // green count pinned during periodic eval
  double early_stop_success = 2.0;  // stop a seed once eval success >= this; > 1 disables
  std::string out_dir = "runs";
  EnvConfig env = default_env_config();
  AgentConfig agent;

  void validate() const {
    if (seeds.empty()) throw ContractViolation("at least one seed required");
    if (total_steps <= 0) throw ContractViolation("total_steps must be positive");
    if (eval_every <= 0 || eval_trials <= 0)
      throw ContractViolation("eval schedule must be positive");
    if (warmup_steps < 0) throw ContractViolation("warmup must be non-negative");
    env.validate();
    agent.validate();
    if (agent.view_width != env.camera.width || agent.view_height != env.camera.height)
      throw ContractViolation("agent raster dims must match camera raster dims");
  }
};

inline RunConfig run_config_from_yaml(const YAML::Node& n, RunConfig base) {
  if (!n || !n.IsDefined() || n.IsNull()) return base;
  using namespace cfgdetail;
  RunConfig r = base;
  if (n["algo"]) r.algo = algo_from_name(n["algo"].as<std::string>());
  if (n["seeds"]) {
    r.seeds.clear();
    for (const auto& s : n["seeds"]) r.seeds.push_back(s.as<std::uint64_t>());
  }
  get(n, "total_steps", r.total_steps);
  get(n, "eval_every", r.eval_every);
  get(n, "eval_trials", r.eval_trials);
  get(n, "warmup_steps", r.warmup_steps);
  get(n, "eval_greens", r.eval_greens);
  get(n, "early_stop_success", r.early_stop_success);
  get(n, "out_dir", r.out_dir);
  r.env = env_config_from_yaml(n["env"], r.env);
  r.agent = DrmAgent::agent_config_from_yaml(n["agent"], r.agent);
  r.agent.algo = r.algo;
  // keep the agent's raster dims slaved to the camera unless set explicitly
  if (!(n["agent"] && n["agent"]["view_width"])) r.agent.view_width = r.env.camera.width;
  if (!(n["agent"] && n["agent"]["view_height"]))
    r.agent.view_height = r.env.camera.height;
  return r;
}

inline RunConfig load_run_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  return run_config_from_yaml(root, RunConfig{});
}

// ---------------------------------------------------------------------------
// Emitters, used to embed the resolved run configuration in checkpoints.

namespace cfgdetail {

inline YAML::Node seq3(const Vec3& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (int i = 0; i < 3; ++i) n.push_back(v[i]);
  return n;
}

inline YAML::Node seq6(const Vec6& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (int i = 0; i < 6; ++i) n.push_back(v[i]);
  return n;
}

inline YAML::Node pose_yaml(const Pose& p) {
  YAML::Node n;
  n["position"] = seq3(p.position);
  YAML::Node q(YAML::NodeType::Sequence);
  q.push_back(p.orientation.w());
  q.push_back(p.orientation.x());
  q.push_back(p.orientation.y());
  q.push_back(p.orientation.z());
  n["quat"] = q;
  return n;
}

}  // namespace cfgdetail

inline YAML::Node world_config_yaml(const WorldConfig& w) {
  using namespace cfgdetail;
  YAML::Node n;
  n["gravity"] = seq3(w.gravity);
  n["berry"]["stem_rest_length"] = w.berry.stem_rest_length;
  n["berry"]["stem_stiffness"] = w.berry.stem_stiffness;
  n["berry"]["stem_damping"] = w.berry.stem_damping;
  n["berry"]["fruit_radius"] = w.berry.fruit_radius;
  n["berry"]["fruit_mass"] = w.berry.fruit_mass;
  n["berry"]["stem_radius"] = w.berry.stem_radius;
  n["gripper"]["max_width"] = w.gripper.max_width;
  n["gripper"]["finger_speed"] = w.gripper.finger_speed;
  n["gripper"]["apparent_mass"] = w.gripper.apparent_mass;
  n["gripper"]["apparent_inertia"] = w.gripper.apparent_inertia;
  n["gripper"]["finger_thickness"] = w.gripper.finger_thickness;
  n["gripper"]["finger_half_len"] = w.gripper.finger_half_len;
  n["gripper"]["finger_half_height"] = w.gripper.finger_half_height;
  n["gripper"]["finger_forward"] = w.gripper.finger_forward;
  n["contact_stiffness"] = w.contact_stiffness;
  n["contact_damping"] = w.contact_damping;
  n["contact_epsilon"] = w.contact_epsilon;
  n["cluster_min"] = seq3(w.cluster_min);
  n["cluster_max"] = seq3(w.cluster_max);
  n["min_anchor_separation"] = w.min_anchor_separation;
  n["red_count"] = w.red_count;
  n["max_spawn_attempts"] = w.max_spawn_attempts;
  n["pick_point_fraction"] = w.pick_point_fraction;
  n["max_fruit_speed"] = w.max_fruit_speed;
  n["gripper_start"] = pose_yaml(w.gripper_start);
  return n;
}

inline YAML::Node randomization_yaml(const RandomizationConfig& r) {
  YAML::Node n;
  n["green_min"] = r.green_min;
  n["green_max"] = r.green_max;
  n["anchor_jitter"] = r.anchor_jitter;
  n["camera_pos_noise"] = r.camera_pos_noise;
  n["camera_rot_noise"] = r.camera_rot_noise;
  n["brightness_min"] = r.brightness_min;
  n["brightness_max"] = r.brightness_max;
  n["pixel_noise_sigma"] = r.pixel_noise_sigma;
  n["start_pose_jitter"] = r.start_pose_jitter;
  n["state_noise"]["pos"] = r.state_noise.pos;
  n["state_noise"]["quat"] = r.state_noise.quat;
  n["state_noise"]["vel"] = r.state_noise.vel;
  n["state_noise"]["width"] = r.state_noise.width;
  return n;
}

inline YAML::Node env_config_yaml(const EnvConfig& e) {
  using namespace cfgdetail;
  YAML::Node n;
  n["world"] = world_config_yaml(e.world);
  n["randomization"] = randomization_yaml(e.randomization);
  n["gains"]["kp"] = seq6(e.gains.kp);
  n["gains"]["kd"] = seq6(e.gains.kd);
  n["gains"]["clip_delta"] = seq6(e.gains.clip_delta);
  n["gains"]["nullspace_stiffness"] = e.gains.nullspace_stiffness;
  n["gains"]["nullspace_damping"] = e.gains.nullspace_damping;
  n["camera"]["width"] = e.camera.width;
  n["camera"]["height"] = e.camera.height;
  n["camera"]["ortho_half_width"] = e.camera.ortho_half_width;
  n["camera"]["near"] = e.camera.near;
  n["camera"]["far"] = e.camera.far;
  n["pos_action_scale"] = e.pos_action_scale;
  n["rot_action_scale"] = e.rot_action_scale;
  n["workspace_min"] = seq3(e.workspace_min);
  n["workspace_max"] = seq3(e.workspace_max);
  n["max_steps"] = e.max_steps;
  n["control_ticks_per_step"] = e.control_ticks_per_step;
  n["control_dt"] = e.control_dt;
  n["reward_weights"]["grasp"] = e.reward_weights.grasp;
  n["reward_weights"]["proximity"] = e.reward_weights.proximity;
  n["reward_weights"]["green_keep"] = e.reward_weights.green_keep;
  n["reward_weights"]["effort"] = e.reward_weights.effort;
  n["reward_weights"]["smoothness"] = e.reward_weights.smoothness;
  return n;
}

inline YAML::Node run_config_yaml(const RunConfig& r) {
  YAML::Node n;
  n["algo"] = algo_name(r.algo);
  YAML::Node seeds(YAML::NodeType::Sequence);
  for (auto s : r.seeds) seeds.push_back(s);
  n["seeds"] = seeds;
  n["total_steps"] = r.total_steps;
  n["eval_every"] = r.eval_every;
  n["eval_trials"] = r.eval_trials;
  n["warmup_steps"] = r.warmup_steps;
  n["eval_greens"] = r.eval_greens;
  n["early_stop_success"] = r.early_stop_success;
  n["out_dir"] = r.out_dir;
  n["env"] = env_config_yaml(r.env);
  n["agent"] = DrmAgent::agent_config_yaml(r.agent);
  return n;
}

}  // namespace stempick
