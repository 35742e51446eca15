#pragma once

#include "stempick/core.hpp"
#include "stempick/env.hpp"

namespace stempick {

// Hand-coded descend-and-grasp controller used to validate that the world +
// impedance stack is solvable independent of learning. Drives the impedance
// reference toward a pre-grasp point behind the target stem, slides forward
// until the stem sits between the fingers, then closes.
class ScriptedPicker {
 public:
  explicit ScriptedPicker(double approach_clearance = 0.06)
      : approach_clearance_(approach_clearance) {}

  void reset() { phase_ = Phase::approach; }

  VecX act(const PickEnv& env) const {
    const EnvConfig& cfg = env.config();
    const World& world = env.world();
    const Vec3 pick = world.picking_point(env.target_id());
    // TCP offset that centers the finger boxes on the stem
    const Vec3 grasp_tcp = pick - Vec3(cfg.world.gripper.finger_forward, 0, 0);
    const Vec3 pregrasp_tcp = grasp_tcp - Vec3(approach_clearance_, 0, 0);

    const Vec3 ref = env.reference_pose().position;
    const Vec3 tcp = world.gripper().pose.position;

    VecX a = VecX::Zero(kActionDim);
    a[6] = -1.0;  // stay open by default

    Vec3 target;
    switch (phase_) {
      case Phase::approach:
        target = pregrasp_tcp;
        if ((ref - pregrasp_tcp).norm() < 0.004 && (tcp - pregrasp_tcp).norm() < 0.01)
          phase_ = Phase::advance;
        break;
      case Phase::advance:
        target = grasp_tcp;
        if ((ref - grasp_tcp).norm() < 0.002 && (tcp - grasp_tcp).norm() < 0.004)
          phase_ = Phase::close;
        break;
      case Phase::close:
        target = grasp_tcp;
        break;
    }
    if (phase_ == Phase::close) a[6] = 1.0;

    const Vec3 delta = target - ref;
    for (int i = 0; i < 3; ++i)
      a[i] = clamp(delta[i] / cfg.pos_action_scale, -1.0, 1.0);
    // hold the spawn orientation
    const Vec3 rot_err = quat_log(env.reference_pose().orientation);
    for (int i = 0; i < 3; ++i)
      a[3 + i] = clamp(-rot_err[i] / cfg.rot_action_scale, -1.0, 1.0);
    return a;
  }

 private:
  enum class Phase { approach, advance, close };
  double approach_clearance_;
  mutable Phase phase_ = Phase::approach;
};

}  // namespace stempick
