#pragma once

#include "stempick/core.hpp"

namespace stempick {

// Oriented box: center pose plus half extents along its local axes.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 half_extents = Vec3::Zero();

  Vec3 to_local(const Vec3& p) const {
    return orientation.inverse() * (p - center);
  }
  Vec3 to_world(const Vec3& local) const { return center + orientation * local; }
};

// Closest point on the box to p, both in world coordinates.
inline Vec3 closest_point_on_box(const OrientedBox& box, const Vec3& p) {
  const Vec3 local = box.to_local(p);
  const Vec3 clamped = local.cwiseMax(-box.half_extents).cwiseMin(box.half_extents);
  return box.to_world(clamped);
}

inline double point_box_distance(const OrientedBox& box, const Vec3& p) {
  return (p - closest_point_on_box(box, p)).norm();
}

// Distance from segment [a,b] to the box. Distance along the segment to a
// convex set is convex in the segment parameter, so ternary search nails it.
inline double segment_box_distance(const OrientedBox& box, const Vec3& a,
                                   const Vec3& b, double* t_closest = nullptr) {
  double lo = 0.0, hi = 1.0;
  auto dist_at = [&](double t) { return point_box_distance(box, a + t * (b - a)); };
  for (int iter = 0; iter < 64; ++iter) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (dist_at(m1) <= dist_at(m2))
      hi = m2;
    else
      lo = m1;
  }
  const double t = 0.5 * (lo + hi);
  if (t_closest) *t_closest = t;
  return dist_at(t);
}

inline double sphere_box_distance(const OrientedBox& box, const Vec3& center,
                                  double radius) {
  return point_box_distance(box, center) - radius;
}

// Capsule = segment swept by a radius.
inline double capsule_box_distance(const OrientedBox& box, const Vec3& a,
                                   const Vec3& b, double radius,
                                   double* t_closest = nullptr) {
  return segment_box_distance(box, a, b, t_closest) - radius;
}

// Penetration of a sphere into a box: depth > 0 means overlap. The normal
// points from the box surface toward the sphere center. Handles the center
// landing inside the box by pushing out along the shallowest face.
struct Penetration {
  bool overlapping = false;
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();
  Vec3 contact_point = Vec3::Zero();
};

inline Penetration sphere_box_penetration(const OrientedBox& box,
                                          const Vec3& center, double radius) {
  Penetration out;
  const Vec3 local = box.to_local(center);
  const Vec3 clamped = local.cwiseMax(-box.half_extents).cwiseMin(box.half_extents);
  if ((local - clamped).squaredNorm() > 1e-24) {
    // center outside the box
    const Vec3 cp = box.to_world(clamped);
    const double d = (center - cp).norm();
    if (d >= radius) return out;
    out.overlapping = true;
    out.depth = radius - d;
    out.normal = (center - cp) / d;
    out.contact_point = cp;
    return out;
  }
  // center inside: exit along the face with the least remaining distance
  int axis = 0;
  double best = std::numeric_limits<double>::max();
  double sign = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double to_pos = box.half_extents[k] - local[k];
    const double to_neg = local[k] + box.half_extents[k];
    if (to_pos < best) { best = to_pos; axis = k; sign = 1.0; }
    if (to_neg < best) { best = to_neg; axis = k; sign = -1.0; }
  }
  Vec3 n_local = Vec3::Zero();
  n_local[axis] = sign;
  out.overlapping = true;
  out.depth = radius + best;
  out.normal = box.orientation * n_local;
  Vec3 face_local = local;
  face_local[axis] = sign * box.half_extents[axis];
  out.contact_point = box.to_world(face_local);
  return out;
}

}  // namespace stempick
