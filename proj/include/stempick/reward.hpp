#pragma once

#include <cmath>

#include "stempick/core.hpp"
#include "stempick/world.hpp"

namespace stempick {

struct RewardWeights {
  double grasp = 8.0;
  double proximity = 4.0;
  double green_keep = 1.0;
  double effort = 2.0;
  double smoothness = 1.0;
};

struct RewardTerms {
  double grasp = 0.0;       // {0,1}
  double proximity = 0.0;   // 1 - tanh(5 * distance to picking point)
  double green_keep = 0.0;  // 1 - tanh(5 * summed green displacement)
  double effort = 0.0;      // -|a|
  double smoothness = 0.0;  // -|a - a_prev|
  double total = 0.0;
};

inline double grasp_reward(const ContactSet& contacts, int target_id) {
  return exclusive_stem_grasp(contacts, target_id) ? 1.0 : 0.0;
}

inline double proximity_reward(const Vec3& picking_point, const Vec3& tcp) {
  return 1.0 - std::tanh(5.0 * (picking_point - tcp).norm());
}

inline double green_keep_reward(const World& world) {
  double moved = 0.0;
  for (const auto& s : world.strawberries()) {
    if (s.removed || s.color != BerryColor::green) continue;
    moved += (s.position - s.initial_position).norm();
  }
  return 1.0 - std::tanh(5.0 * moved);
}

inline double effort_reward(const VecX& action) { return -action.norm(); }

inline double smoothness_reward(const VecX& action, const VecX& prev_action) {
  if (action.size() != prev_action.size())
    throw ContractViolation("action dimensions differ between steps");
  return -(action - prev_action).norm();
}

inline RewardTerms compute_reward(const World& world, int target_id,
                                  const VecX& action, const VecX& prev_action,
                                  const RewardWeights& w = {}) {
  RewardTerms t;
  t.grasp = grasp_reward(world.detect_contacts(), target_id);
  t.proximity =
      proximity_reward(world.picking_point(target_id), world.grasp_center());
  t.green_keep = green_keep_reward(world);
  t.effort = effort_reward(action);
  t.smoothness = smoothness_reward(action, prev_action);
  t.total = w.grasp * t.grasp + w.proximity * t.proximity +
            w.green_keep * t.green_keep + w.effort * t.effort +
            w.smoothness * t.smoothness;
  return t;
}

}  // namespace stempick
