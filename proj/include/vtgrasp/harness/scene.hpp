#pragma once

// Top-down depth and mask rendering of a single object on flat ground, used
// in place of the detection network's output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "vtgrasp/harness/scenario.hpp"
#include "vtgrasp/image.hpp"

namespace vtgrasp::harness {

struct SceneImages {
  GrayImage mask;     // 255 on the object
  DepthImage depth;   // mm, 0 = no return
};

struct Detection {
  GrayImage mask;
  ObjectClass label = ObjectClass::cardboard;
};

namespace detail {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

/// Ray/box in object coordinates: x in [-L/2, L/2], y in [-W/2, W/2], z in [0, H].
inline double hit_box(const geometry::Vec3& o, const geometry::Vec3& d, const geometry::Vec3& lo,
                      const geometry::Vec3& hi) {
  double t0 = 0.0, t1 = kNoHit;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo[i] || o[i] > hi[i]) return kNoHit;
      continue;
    }
    double a = (lo[i] - o[i]) / d[i], b = (hi[i] - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return kNoHit;
  }
  return t0;
}

/// Ray/cylinder lying along x with radius r, axis at height r, capped at |x| = L/2.
inline double hit_cylinder(const geometry::Vec3& o, const geometry::Vec3& d, double r, double half_len) {
  double best = kNoHit;
  const double oy = o.y(), oz = o.z() - r;
  const double a = d.y() * d.y() + d.z() * d.z();
  if (a > 1e-15) {
    const double b = 2.0 * (oy * d.y() + oz * d.z());
    const double c = oy * oy + oz * oz - r * r;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      for (double t : {(-b - std::sqrt(disc)) / (2 * a), (-b + std::sqrt(disc)) / (2 * a)}) {
        if (t > 0 && std::abs(o.x() + t * d.x()) <= half_len) best = std::min(best, t);
      }
    }
  }
  if (std::abs(d.x()) > 1e-15) {
    for (double cap : {-half_len, half_len}) {
      const double t = (cap - o.x()) / d.x();
      if (t <= 0) continue;
      const double y = oy + t * d.y(), z = oz + t * d.z();
      if (y * y + z * z <= r * r) best = std::min(best, t);
    }
  }
  return best;
}

}  // namespace detail

/// Renders the camera's view at the detection pose. Depth is the distance
/// along the optical axis, matching deproject().
inline SceneImages render_scene(const ScenarioConfig& s) {
  const auto& k = s.calibration.intrinsics;
  const auto cam = s.calibration.camera_to_base();
  const geometry::Mat3 r = cam.rotation();
  const geometry::Vec3 origin = cam.translation();
  // Object frame: translate to the placement, rotate by -yaw.
  const double cy = std::cos(s.object_yaw_rad), sy = std::sin(s.object_yaw_rad);
  geometry::Mat3 to_obj;
  to_obj << cy, sy, 0, -sy, cy, 0, 0, 0, 1;
  const geometry::Vec3 o_obj = to_obj * (origin - geometry::Vec3(s.object_x, s.object_y, 0.0));
  const auto& ob = s.object;
  const double w = ob.width_mm / 1000.0, l = ob.length_mm / 1000.0, h = ob.height_mm / 1000.0;

  SceneImages out{GrayImage(k.width, k.height), DepthImage(k.width, k.height)};
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const geometry::Vec3 ray_cam(1.0, (u - k.cx) / k.fx, (v - k.cy) / k.fy);
      const geometry::Vec3 ray = r * ray_cam;
      double t_ground = detail::kNoHit;
      if (ray.z() < -1e-12) t_ground = -origin.z() / ray.z();
      const geometry::Vec3 d_obj = to_obj * ray;
      const double t_obj = ob.shape == Shape::box
                               ? detail::hit_box(o_obj, d_obj, {-l / 2, -w / 2, 0.0}, {l / 2, w / 2, h})
                               : detail::hit_cylinder(o_obj, d_obj, w / 2, l / 2);
      const double t = std::min(t_ground, t_obj);
      if (t == detail::kNoHit || t <= 0) continue;
      out.depth(u, v) = static_cast<std::uint16_t>(std::clamp(std::lround(t * 1000.0), 0L, 65535L));
      if (t_obj <= t_ground) out.mask(u, v) = 255;
    }
  }
  return out;
}

/// Zeroes the depth of round(fraction * object pixels) object pixels, chosen by seed.
inline void inject_invalid_depth(SceneImages& scene, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  auto m = scene.mask.pixels();
  for (std::size_t i = 0; i < m.size(); ++i) if (m[i]) idx.push_back(i);
  std::mt19937_64 rng(seed ^ 0xDE97ull);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
  auto d = scene.depth.pixels();
  for (std::size_t i = 0; i < n; ++i) d[idx[i]] = 0;
}

/// Stand-in for the detector: the true mask and class, unless a fault is injected.
inline Detection detect(const SceneImages& scene, const ScenarioConfig& s) {
  Detection det{scene.mask, s.object.cls};
  switch (s.faults.detection) {
    case DetectionFault::none: break;
    case DetectionFault::empty_mask: det.mask = GrayImage(scene.mask.width(), scene.mask.height()); break;
    case DetectionFault::misclassified: {
      const auto it = std::find(kObjectClasses.begin(), kObjectClasses.end(), s.object.cls);
      const auto next = std::next(it) == kObjectClasses.end() ? kObjectClasses.begin() : std::next(it);
      det.label = *next;
      break;
    }
  }
  return det;
}

inline std::size_t count_mask(const GrayImage& mask) {
  auto p = mask.pixels();
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace vtgrasp::harness
