#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace stempick {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;
using Quat = Eigen::Quaterniond;

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();
};

struct Wrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
};

inline Vec6 stack_twist(const Twist& t) {
  Vec6 v;
  v << t.linear, t.angular;
  return v;
}

inline Vec6 stack_wrench(const Wrench& w) {
  Vec6 v;
  v << w.force, w.torque;
  return v;
}

// Rotation vector (axis * angle) of a unit quaternion, shortest arc.
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v(q.x(), q.y(), q.z());
  const double s = v.norm();
  if (s < 1e-12) return 2.0 * v;  // small-angle limit
  const double angle = 2.0 * std::atan2(s, q.w());
  return (angle / s) * v;
}

// Quaternion of a rotation vector.
inline Quat quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    return q.normalized();
  }
  const Vec3 axis = rotvec / angle;
  return Quat(Eigen::AngleAxisd(angle, axis));
}

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// Raised when an operation's input contract is violated.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when integration produced non-finite or runaway state.
struct SimulationDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stempick
