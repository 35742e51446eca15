#pragma once

#include <utility>
#include <vector>

#include "stempick/core.hpp"

namespace stempick {

// One revolute joint of a serial chain. The joint frame is placed at
// `origin` (parent coordinates) with `fixed_rotation` applied, then the
// joint rotates about `axis` expressed in that frame.
struct RevoluteJoint {
  Vec3 axis = Vec3::UnitZ();
  Vec3 origin = Vec3::Zero();
  Quat fixed_rotation = Quat::Identity();
};

struct RigidTransform {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();
};

class ArmModel {
 public:
  ArmModel(std::vector<RevoluteJoint> joints, RigidTransform ee_offset,
           VecX rest_posture)
      : joints_(std::move(joints)),
        ee_offset_(std::move(ee_offset)),
        rest_posture_(std::move(rest_posture)) {
    if (joints_.empty()) throw ContractViolation("arm needs at least one joint");
    for (const auto& j : joints_) {
      if (std::abs(j.axis.norm() - 1.0) > 1e-9)
        throw ContractViolation("joint axis must be unit length");
      if (std::abs(j.fixed_rotation.norm() - 1.0) > 1e-9)
        throw ContractViolation("joint fixed rotation must be a unit quaternion");
    }
    if (std::abs(ee_offset_.rotation.norm() - 1.0) > 1e-9)
      throw ContractViolation("ee offset rotation must be a unit quaternion");
    if (rest_posture_.size() != static_cast<Eigen::Index>(joints_.size()))
      throw ContractViolation("rest posture length must match joint count");
  }

  int dof() const { return static_cast<int>(joints_.size()); }
  const std::vector<RevoluteJoint>& joints() const { return joints_; }
  const RigidTransform& ee_offset() const { return ee_offset_; }
  const VecX& rest_posture() const { return rest_posture_; }

 private:
  std::vector<RevoluteJoint> joints_;
  RigidTransform ee_offset_;
  VecX rest_posture_;
};

struct JointState {
  VecX q;
  VecX dq;
};

namespace detail {

struct ChainFrames {
  std::vector<Vec3> joint_origin;  // world position of each joint frame
  std::vector<Vec3> joint_axis;    // world direction of each joint axis
  Pose tcp;
};

inline ChainFrames walk_chain(const ArmModel& model, const VecX& q) {
  if (q.size() != model.dof())
    throw ContractViolation("joint vector length does not match model");
  ChainFrames out;
  out.joint_origin.reserve(model.dof());
  out.joint_axis.reserve(model.dof());
  Vec3 p = Vec3::Zero();
  Quat r = Quat::Identity();
  for (int i = 0; i < model.dof(); ++i) {
    const RevoluteJoint& j = model.joints()[static_cast<size_t>(i)];
    p += r * j.origin;
    r = r * j.fixed_rotation;
    out.joint_origin.push_back(p);
    out.joint_axis.push_back(r * j.axis);
    r = r * Quat(Eigen::AngleAxisd(q[i], j.axis));
  }
  p += r * model.ee_offset().translation;
  r = r * model.ee_offset().rotation;
  out.tcp.position = p;
  out.tcp.orientation = r.normalized();
  return out;
}

}  // namespace detail

inline Pose forward_kinematics(const ArmModel& model, const VecX& q) {
  return detail::walk_chain(model, q).tcp;
}

// Columns: (z_i x (p_tcp - p_i), z_i). Rows 0-2 linear, 3-5 angular.
inline Mat6X geometric_jacobian(const ArmModel& model, const VecX& q) {
  const detail::ChainFrames f = detail::walk_chain(model, q);
  Mat6X jac(6, model.dof());
  for (int i = 0; i < model.dof(); ++i) {
    const Vec3& z = f.joint_axis[static_cast<size_t>(i)];
    const Vec3 r = f.tcp.position - f.joint_origin[static_cast<size_t>(i)];
    jac.col(i).head<3>() = z.cross(r);
    jac.col(i).tail<3>() = z;
  }
  return jac;
}

// P = I - J^T (J J^T + lambda I)^-1 J, damped so singular J is harmless.
inline MatX nullspace_projector(const ArmModel& model, const VecX& q,
                                double damping = 1e-6) {
  const Mat6X jac = geometric_jacobian(model, q);
  const Eigen::Matrix<double, 6, 6> gram =
      jac * jac.transpose() + damping * Eigen::Matrix<double, 6, 6>::Identity();
  const MatX pinv_j = gram.ldlt().solve(jac).transpose();  // J^T (J J^T + lI)^-1
  return MatX::Identity(model.dof(), model.dof()) - pinv_j * jac;
}

}  // namespace stempick
