#pragma once

// Synthetic fingertip images: a fixed per-unit background, an optional
// textured contact patch, and per-frame uniform noise. Deterministic for a
// given seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vtgrasp/tactile_image.hpp"

namespace vtgrasp::harness {

struct StreamCalibration {
  int width = kTactileWidth;
  int height = kTactileHeight;
  int noise_amplitude = 5;
  double patch_semi_x = 70.0;     // px
  double patch_semi_y = 90.0;     // px
  int patch_offset = 50;          // gray offset of the patch at first touch
  int depth_gain = 3;             // extra offset per step of compression
  int max_offset = 90;
  int texture_amplitude = 40;
  int texture_cell = 10;          // checker cell size, px
  double slip_translation_px = 10.0;
  double transient_intensity = 0.1;  // patch intensity while the elastomer settles
  int noise_bank_size = 8;
};

struct PatchPose {
  double dx = 0.0;
  double dy = 0.0;
  double angle_rad = 0.0;
};

/// Local brightening inside the patch (grip-pressure relaxation).
struct PressureSpot {
  double x = 0.0;  // relative to the patch centre, px
  double y = 0.0;
  double radius = 0.0;
  int offset = 0;
};

struct ContactAppearance {
  bool in_contact = false;
  int offset = 0;
  double intensity = 1.0;  // scales offset and texture
  PatchPose pose;
  double semi_x = 0.0;     // 0 = calibration default
  double semi_y = 0.0;
  std::vector<PressureSpot> spots;
};

class SyntheticTactileStream {
 public:
  SyntheticTactileStream(SensorUnit unit, const StreamCalibration& cal, std::uint64_t seed)
      : unit_(unit), cal_(cal), rng_(seed ^ (unit == SensorUnit::A ? 0x5A17ull : 0xB0B5ull)) {
    build_background();
    build_noise_bank();
  }

  SensorUnit unit() const noexcept { return unit_; }
  const StreamCalibration& calibration() const noexcept { return cal_; }

  /// Patch offset for a compression depth (steps past first touch).
  int offset_for_depth(int depth) const {
    return std::min(cal_.patch_offset + cal_.depth_gain * std::max(depth, 0), cal_.max_offset);
  }

  TactileFrame render(const ContactAppearance& look, std::int64_t timestamp_ms) {
    const int k = pick_noise();
    TactileFrame f;
    f.unit = unit_;
    f.timestamp_ms = timestamp_ms;
    f.pixels = noisy_background_[k];
    if (look.in_contact && look.intensity > 0.0) paint_patch(f.pixels, look, noise_[k]);
    return f;
  }

  /// Frame with noise bank entry 0 and no contact, used as a provider reference.
  TactileFrame reference_frame() const {
    TactileFrame f;
    f.unit = unit_;
    f.pixels = noisy_background_[0];
    f.id = std::string(to_string(unit_)) + ":reference";
    return f;
  }

 private:
  static std::uint8_t clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

  void build_background() {
    background_ = RgbImage(cal_.width, cal_.height);
    const double w = cal_.width, h = cal_.height;
    const bool a = unit_ == SensorUnit::A;
    for (int y = 0; y < cal_.height; ++y) {
      for (int x = 0; x < cal_.width; ++x) {
        const double fx = x / w, fy = y / h;
        const double vignette = 12.0 * ((fx - 0.5) * (fx - 0.5) + (fy - 0.5) * (fy - 0.5));
        background_(x, y) = {clamp8(static_cast<int>((a ? 62 : 70) + 28 * fx - vignette)),
                             clamp8(static_cast<int>((a ? 84 : 76) + 22 * fy - vignette)),
                             clamp8(static_cast<int>((a ? 112 : 104) + 8 * (fx + fy) - vignette))};
      }
    }
  }

  void build_noise_bank() {
    const int amp = cal_.noise_amplitude;
    std::uniform_int_distribution<int> dist(-amp, amp);
    const std::size_t n = background_.size() * 3;
    for (int b = 0; b < std::max(cal_.noise_bank_size, 1); ++b) {
      std::vector<std::int8_t> noise(n);
      for (auto& v : noise) v = static_cast<std::int8_t>(amp > 0 ? dist(rng_) : 0);
      RgbImage img = background_;
      auto px = img.pixels();
      for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = {clamp8(px[i].r + noise[3 * i]), clamp8(px[i].g + noise[3 * i + 1]), clamp8(px[i].b + noise[3 * i + 2])};
      }
      noise_.push_back(std::move(noise));
      noisy_background_.push_back(std::move(img));
    }
  }

  int pick_noise() {
    std::uniform_int_distribution<int> dist(0, static_cast<int>(noise_.size()) - 1);
    return dist(rng_);
  }

  void paint_patch(RgbImage& img, const ContactAppearance& look, const std::vector<std::int8_t>& noise) const {
    const double sx = look.semi_x > 0 ? look.semi_x : cal_.patch_semi_x;
    const double sy = look.semi_y > 0 ? look.semi_y : cal_.patch_semi_y;
    const double cx = cal_.width / 2.0 + look.pose.dx;
    const double cy = cal_.height / 2.0 + look.pose.dy;
    const double c = std::cos(look.pose.angle_rad), s = std::sin(look.pose.angle_rad);
    const double reach = std::max(sx, sy) + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(cal_.width - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(cal_.height - 1, static_cast<int>(std::ceil(cy + reach)));
    const double cell = cal_.texture_cell;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        // Patch-local coordinates (inverse rotation about the patch centre).
        const double rx = x + 0.5 - cx, ry = y + 0.5 - cy;
        const double u = c * rx + s * ry;
        const double v = -s * rx + c * ry;
        if ((u / sx) * (u / sx) + (v / sy) * (v / sy) > 1.0) continue;
        const long cu = static_cast<long>(std::floor(u / cell)), cv = static_cast<long>(std::floor(v / cell));
        int add = look.offset + (((cu + cv) & 1) ? cal_.texture_amplitude : 0);
        for (const auto& spot : look.spots) {
          const double du = u - spot.x, dv = v - spot.y;
          if (du * du + dv * dv <= spot.radius * spot.radius) add += spot.offset;
        }
        add = static_cast<int>(std::lround(add * look.intensity));
        const std::size_t i = static_cast<std::size_t>(y) * cal_.width + x;
        const Rgb8 b = background_(x, y);
        img(x, y) = {clamp8(b.r + add + noise[3 * i]), clamp8(b.g + add + noise[3 * i + 1]),
                     clamp8(b.b + add + noise[3 * i + 2])};
      }
    }
  }

  SensorUnit unit_;
  StreamCalibration cal_;
  std::mt19937_64 rng_;
  RgbImage background_;
  std::vector<std::vector<std::int8_t>> noise_;
  std::vector<RgbImage> noisy_background_;
};

}  // namespace vtgrasp::harness
