#pragma once

#include <vector>

#include "stempick/core.hpp"
#include "stempick/kinematics.hpp"

namespace stempick {

struct ImpedanceGains {
  Vec6 kp = (Vec6() << 1000, 1000, 1000, 50, 50, 50).finished();
  Vec6 kd = Vec6::Zero();
  Vec6 clip_delta = (Vec6() << 0.02, 0.02, 0.02, 0.1, 0.1, 0.1).finished();
  double nullspace_stiffness = 5.0;
  double nullspace_damping = 1.0;

  void validate() const {
    if ((kp.array() < 0).any() || (kd.array() < 0).any() ||
        nullspace_stiffness < 0 || nullspace_damping < 0)
      throw ContractViolation("impedance gains must be non-negative");
    if ((clip_delta.array() <= 0).any())
      throw ContractViolation("clip delta must be positive");
  }
};

struct ControlCommand {
  Pose reference_pose;
  Wrench feed_forward;
};

// e = measured - reference. Rotation rows are the axis-angle of the world
// frame rotation taking the reference orientation onto the measured one.
inline Vec6 pose_error(const Pose& measured, const Pose& reference) {
  Vec6 e;
  e.head<3>() = measured.position - reference.position;
  e.tail<3>() = quat_log(measured.orientation * reference.orientation.inverse());
  return e;
}

inline Vec6 clip_error(const Vec6& e, const Vec6& delta) {
  return e.cwiseMax(-delta).cwiseMin(delta);
}

// Restoring PD law: F = -kp.e - kd.edot + ff + cor.
inline Wrench compute_wrench(const ImpedanceGains& gains, const Vec6& e_clipped,
                             const Vec6& e_dot, const Wrench& ff,
                             const Wrench& cor) {
  const Vec6 f = -gains.kp.cwiseProduct(e_clipped) - gains.kd.cwiseProduct(e_dot) +
                 stack_wrench(ff) + stack_wrench(cor);
  Wrench w;
  w.force = f.head<3>();
  w.torque = f.tail<3>();
  return w;
}

inline VecX wrench_to_torques(const ArmModel& model, const VecX& q,
                              const Wrench& w) {
  return geometric_jacobian(model, q).transpose() * stack_wrench(w);
}

inline VecX nullspace_torques(const ArmModel& model, const JointState& state,
                              const ImpedanceGains& gains) {
  const VecX raw = -gains.nullspace_stiffness * (state.q - model.rest_posture()) -
                   gains.nullspace_damping * state.dq;
  return nullspace_projector(model, state.q) * raw;
}

// Task-space half of the controller; what the floating-body simulation
// consumes directly. Coriolis feed-forward is zero in simulation.
inline Wrench impedance_wrench(const ImpedanceGains& gains, const Pose& measured,
                               const Twist& twist, const ControlCommand& cmd) {
  const Vec6 e = clip_error(pose_error(measured, cmd.reference_pose), gains.clip_delta);
  return compute_wrench(gains, e, stack_twist(twist), cmd.feed_forward, Wrench{});
}

inline VecX controller_tick(const ArmModel& model, const JointState& state,
                            const Pose& measured, const Twist& twist,
                            const ControlCommand& cmd, const ImpedanceGains& gains) {
  const Wrench w = impedance_wrench(gains, measured, twist, cmd);
  return wrench_to_torques(model, state.q, w) + nullspace_torques(model, state, gains);
}

// Zero-order hold: one policy-rate reference repeated for every control tick.
inline std::vector<ControlCommand> rate_bridge(const Pose& policy_pose, int ticks) {
  if (ticks <= 0) throw ContractViolation("rate bridge needs a positive tick count");
  ControlCommand cmd;
  cmd.reference_pose = policy_pose;
  return std::vector<ControlCommand>(static_cast<size_t>(ticks), cmd);
}

}  // namespace stempick
