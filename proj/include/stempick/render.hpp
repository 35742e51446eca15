#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "stempick/core.hpp"
#include "stempick/rng.hpp"
#include "stempick/world.hpp"

namespace stempick {

// Two-channel raster: channel 0 = color class, channel 1 = normalized depth.
struct Image {
  int width = 0;
  int height = 0;
  static constexpr int channels = 2;
  std::vector<double> data;  // [channel][row][col]

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(channels) * w * h, 0.0) {}

  double& at(int c, int row, int col) {
    return data[static_cast<size_t>((c * height + row) * width + col)];
  }
  double at(int c, int row, int col) const {
    return data[static_cast<size_t>((c * height + row) * width + col)];
  }
  size_t size() const { return data.size(); }
};

// Color-class values; depth brightens toward the camera.
constexpr double kColorRed = 1.0;
constexpr double kColorGreen = 0.5;
constexpr double kColorStem = 0.25;

struct CameraConfig {
  Pose local_pose;  // camera in gripper frame; +z looks out of the lens
  int width = 24;
  int height = 24;
  double ortho_half_width = 0.12;  // meters covered by half the image
  double near = 0.02;
  double far = 0.60;

  void validate() const {
    if (width <= 0 || height <= 0) throw ContractViolation("raster size must be positive");
    if (!(far > near)) throw ContractViolation("far plane must exceed near plane");
    if (ortho_half_width <= 0) throw ContractViolation("view extent must be positive");
  }
};

// Camera axes in the gripper frame (x forward, y left, z up): look along +x,
// image right = -y, image down = -z; pitch tilts the look direction in the
// x/z plane.
inline Pose wrist_camera_pose(double pitch, const Vec3& offset) {
  Eigen::Matrix3d base;
  base.col(0) = Vec3(0, -1, 0);  // image right
  base.col(1) = Vec3(0, 0, -1);  // image down
  base.col(2) = Vec3(1, 0, 0);   // look direction
  const Eigen::Matrix3d r = Eigen::AngleAxisd(pitch, Vec3::UnitY()).toRotationMatrix() * base;
  return Pose{offset, Quat(r).normalized()};
}

namespace detail {

struct RasterContext {
  Image* img;
  std::vector<double> zbuf;
  Pose cam;  // world pose
  double pixel_size;
  double near, far;

  void paint(const Vec3& world_point, double radius, double color) {
    const Vec3 local = cam.orientation.inverse() * (world_point - cam.position);
    const double z = local.z() - radius;  // front surface
    if (z < near || local.z() > far) return;
    const double u = local.x() / pixel_size + img->width / 2.0;
    const double v = local.y() / pixel_size + img->height / 2.0;
    const double pr = std::max(radius / pixel_size, 0.5);
    const int c0 = std::max(0, static_cast<int>(std::floor(u - pr)));
    const int c1 = std::min(img->width - 1, static_cast<int>(std::ceil(u + pr)));
    const int r0 = std::max(0, static_cast<int>(std::floor(v - pr)));
    const int r1 = std::min(img->height - 1, static_cast<int>(std::ceil(v + pr)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        const double dx = (col + 0.5) - u;
        const double dy = (row + 0.5) - v;
        const double d2 = dx * dx + dy * dy;
        if (d2 > pr * pr) continue;
        // bulge the surface toward the camera inside the disk
        const double bulge = radius * std::sqrt(std::max(0.0, 1.0 - d2 / (pr * pr)));
        const double depth = local.z() - bulge;
        double& zb = zbuf[static_cast<size_t>(row * img->width + col)];
        if (depth >= zb) continue;
        zb = depth;
        img->at(0, row, col) = color;
        img->at(1, row, col) = 1.0 - clamp((depth - near) / (far - near), 0.0, 1.0);
      }
    }
  }
};

}  // namespace detail

inline Image render_view(const World& world, const Pose& camera_world,
                         const CameraConfig& cfg) {
  cfg.validate();
  Image img(cfg.width, cfg.height);
  detail::RasterContext ctx;
  ctx.img = &img;
  ctx.zbuf.assign(static_cast<size_t>(cfg.width) * cfg.height,
                  std::numeric_limits<double>::infinity());
  ctx.cam = camera_world;
  ctx.pixel_size = 2.0 * cfg.ortho_half_width / cfg.width;
  ctx.near = cfg.near;
  ctx.far = cfg.far;

  const double stem_r = world.config().berry.stem_radius;
  for (const auto& s : world.strawberries()) {
    if (s.removed) continue;
    const auto [a, b] = world.stem_segment(s);
    const int samples = 48;
    for (int k = 0; k <= samples; ++k) {
      const double t = static_cast<double>(k) / samples;
      ctx.paint(a + t * (b - a), stem_r, kColorStem);
    }
    ctx.paint(s.position, s.fruit_radius,
              s.color == BerryColor::red ? kColorRed : kColorGreen);
  }
  return img;
}

inline void apply_image_noise(Image& img, double brightness, double pixel_sigma,
                              Rng& rng) {
  for (int row = 0; row < img.height; ++row)
    for (int col = 0; col < img.width; ++col)
      img.at(0, row, col) = clamp(img.at(0, row, col) * brightness, 0.0, 1.0);
  if (pixel_sigma > 0.0) {
    for (int c = 0; c < Image::channels; ++c)
      for (int row = 0; row < img.height; ++row)
        for (int col = 0; col < img.width; ++col)
          img.at(c, row, col) =
              clamp(img.at(c, row, col) + rng.normal(0.0, pixel_sigma), 0.0, 1.0);
  }
}

}  // namespace stempick
