#pragma once

// Tactile image preprocessing: grayscale conversion, frame differencing,
// binarisation and morphological opening, producing the binary evidence
// image consumed by the slip classifiers.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vtgrasp/error.hpp"
#include "vtgrasp/image.hpp"

namespace vtgrasp {

enum class SensorUnit { A, B };

constexpr std::string_view to_string(SensorUnit u) { return u == SensorUnit::A ? "A" : "B"; }

inline SensorUnit parse_sensor_unit(std::string_view s) {
  if (s == "A" || s == "a") return SensorUnit::A;
  if (s == "B" || s == "b") return SensorUnit::B;
  throw Error(ErrorCode::parse, "unknown sensor unit '" + std::string(s) + "'");
}

/// One RGB image from a fingertip sensor. `id` is an optional label used by
/// table-driven score providers; when empty, frame_id() derives one.
struct TactileFrame {
  RgbImage pixels;
  std::int64_t timestamp_ms = 0;
  SensorUnit unit = SensorUnit::A;
  std::string id;
};

inline std::string frame_id(const TactileFrame& f) {
  if (!f.id.empty()) return f.id;
  return std::string(to_string(f.unit)) + ":" + std::to_string(f.timestamp_ms);
}

inline constexpr int kTactileWidth = 240;
inline constexpr int kTactileHeight = 320;

/// Ordered grayscale frames from one unit.
struct FrameSequence {
  std::vector<GrayImage> frames;
  std::vector<std::int64_t> timestamps_ms;
  SensorUnit unit = SensorUnit::A;

  void validate(std::size_t expected_length) const {
    if (frames.size() != expected_length) {
      throw Error(ErrorCode::structural, "frame sequence has " + std::to_string(frames.size()) +
                                             " frames, expected " + std::to_string(expected_length));
    }
    if (timestamps_ms.size() != frames.size()) {
      throw Error(ErrorCode::structural, "timestamp count does not match frame count");
    }
    for (std::size_t i = 1; i < frames.size(); ++i) {
      require_same_shape(frames[0], frames[i], "frame sequence");
      if (timestamps_ms[i] <= timestamps_ms[i - 1]) {
        throw Error(ErrorCode::structural, "frame timestamps must be strictly increasing");
      }
    }
  }
};

/// Binary image whose pixels are exactly 0 or 255.
class FilteredImage {
 public:
  FilteredImage() = default;
  explicit FilteredImage(GrayImage img) : img_(std::move(img)) {
    for (auto v : img_.pixels()) {
      if (v != 0 && v != 255) throw Error(ErrorCode::structural, "filtered image must be binary");
    }
  }

  const GrayImage& image() const noexcept { return img_; }
  int width() const noexcept { return img_.width(); }
  int height() const noexcept { return img_.height(); }

  friend bool operator==(const FilteredImage&, const FilteredImage&) = default;

 private:
  struct trusted_tag {};
  FilteredImage(GrayImage img, trusted_tag) : img_(std::move(img)) {}
  friend FilteredImage make_filtered_unchecked(GrayImage img);

  GrayImage img_;
};

inline FilteredImage make_filtered_unchecked(GrayImage img) {
  return FilteredImage(std::move(img), FilteredImage::trusted_tag{});
}

/// Boolean mask with an anchor cell. Dimensions are odd.
class StructuringElement {
 public:
  StructuringElement(GrayImage mask, int anchor_x, int anchor_y)
      : mask_(std::move(mask)), ax_(anchor_x), ay_(anchor_y) {
    if (mask_.width() % 2 == 0 || mask_.height() % 2 == 0) {
      throw Error(ErrorCode::invalid_config, "structuring element must have odd dimensions");
    }
    if (!mask_.contains(ax_, ay_)) {
      throw Error(ErrorCode::invalid_config, "structuring element anchor outside mask");
    }
    full_ = true;
    bool any = false;
    for (auto& v : mask_.pixels()) {
      v = v ? 1 : 0;
      any = any || v;
      full_ = full_ && v;
    }
    if (!any) throw Error(ErrorCode::invalid_config, "structuring element has no active cell");
  }

  static StructuringElement rectangle(int width, int height) {
    return StructuringElement(GrayImage(width, height, 1), width / 2, height / 2);
  }
  static StructuringElement square(int size) { return rectangle(size, size); }

  static StructuringElement ellipse(int width, int height) {
    GrayImage m(width, height, 0);
    const double rx = width / 2.0, ry = height / 2.0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = (x + 0.5 - rx) / rx, dy = (y + 0.5 - ry) / ry;
        m(x, y) = dx * dx + dy * dy <= 1.0 ? 1 : 0;
      }
    }
    return StructuringElement(std::move(m), width / 2, height / 2);
  }

  const GrayImage& mask() const noexcept { return mask_; }
  int anchor_x() const noexcept { return ax_; }
  int anchor_y() const noexcept { return ay_; }
  bool is_full_rectangle() const noexcept { return full_; }

 private:
  GrayImage mask_;
  int ax_ = 0;
  int ay_ = 0;
  bool full_ = false;
};

struct FilterConfig {
  int binarize_threshold = 25;
  int kernel_width = 5;
  int kernel_height = 5;
  std::size_t sequence_length = 4;

  StructuringElement kernel() const { return StructuringElement::rectangle(kernel_width, kernel_height); }

  void validate() const {
    if (binarize_threshold < 1 || binarize_threshold > 255) {
      throw Error(ErrorCode::invalid_config, "binarize threshold must be in [1, 255]");
    }
    if (sequence_length < 2) throw Error(ErrorCode::invalid_config, "sequence length must be >= 2");
    (void)kernel();
  }
};

// --- pixel operations ------------------------------------------------------

/// Luma with round-half-up: (299 R + 587 G + 114 B + 500) / 1000.
constexpr std::uint8_t luma(Rgb8 p) noexcept {
  return static_cast<std::uint8_t>((299u * p.r + 587u * p.g + 114u * p.b + 500u) / 1000u);
}

inline GrayImage to_grayscale(const RgbImage& rgb) {
  GrayImage out(rgb.width(), rgb.height());
  std::transform(rgb.pixels().begin(), rgb.pixels().end(), out.pixels().begin(), luma);
  return out;
}

inline GrayImage to_grayscale(const TactileFrame& frame) { return to_grayscale(frame.pixels); }

inline GrayImage absolute_difference(const GrayImage& first, const GrayImage& last) {
  require_same_shape(first, last, "frame difference");
  GrayImage out(first.width(), first.height());
  auto a = first.pixels(), b = last.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<std::uint8_t>(a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]);
  }
  return out;
}

/// |last - first| over the sequence; the middle frames only fix the window length.
inline GrayImage frame_difference(const FrameSequence& seq) {
  if (seq.frames.size() < 2) throw Error(ErrorCode::structural, "frame difference needs >= 2 frames");
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    require_same_shape(seq.frames[0], seq.frames[i], "frame difference");
  }
  return absolute_difference(seq.frames.front(), seq.frames.back());
}

inline GrayImage binarize(const GrayImage& img, int threshold) {
  GrayImage out(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), out.pixels().begin(),
                 [threshold](std::uint8_t v) -> std::uint8_t { return v >= threshold ? 255 : 0; });
  return out;
}

// --- morphology ------------------------------------------------------------
// Pixels outside the image are background (0) for both erosion and dilation.

namespace detail {

// Window [x - before, x + after] along a line of n samples with stride.
// erode: all samples white and in bounds; dilate: any in-bounds sample white.
inline void line_pass(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride,
                      int before, int after, bool erode, std::vector<int>& prefix) {
  prefix.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + (in[i * stride] ? 1 : 0);
  const int span = before + after + 1;
  for (int i = 0; i < n; ++i) {
    const int lo = i - before, hi = i + after;
    std::uint8_t v;
    if (erode) {
      v = (lo >= 0 && hi < n && prefix[hi + 1] - prefix[lo] == span) ? 255 : 0;
    } else {
      const int clo = std::max(lo, 0), chi = std::min(hi, n - 1);
      v = (clo <= chi && prefix[chi + 1] - prefix[clo] > 0) ? 255 : 0;
    }
    out[i * stride] = v;
  }
}

inline GrayImage separable(const GrayImage& img, int kw, int kh, int ax, int ay, bool erode) {
  const int w = img.width(), h = img.height();
  GrayImage tmp(w, h), out(w, h);
  std::vector<int> prefix;
  // Erosion reads in(p + q); dilation reads in(p - q) over mask offsets q.
  const int row_before = erode ? ax : kw - 1 - ax;
  const int row_after = erode ? kw - 1 - ax : ax;
  const int col_before = erode ? ay : kh - 1 - ay;
  const int col_after = erode ? kh - 1 - ay : ay;
  for (int y = 0; y < h; ++y) {
    line_pass(img.row(y).data(), tmp.row(y).data(), w, 1, row_before, row_after, erode, prefix);
  }
  const std::uint8_t* tin = tmp.pixels().data();
  std::uint8_t* o = out.pixels().data();
  for (int x = 0; x < w; ++x) {
    line_pass(tin + x, o + x, h, w, col_before, col_after, erode, prefix);
  }
  return out;
}

inline GrayImage generic(const GrayImage& img, const StructuringElement& k, bool erode) {
  const int w = img.width(), h = img.height();
  const auto& m = k.mask();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool result = erode;
      for (int j = 0; j < m.height() && result == erode; ++j) {
        for (int i = 0; i < m.width(); ++i) {
          if (!m(i, j)) continue;
          const int dx = i - k.anchor_x(), dy = j - k.anchor_y();
          const int sx = erode ? x + dx : x - dx;
          const int sy = erode ? y + dy : y - dy;
          const bool white = img.contains(sx, sy) && img(sx, sy) != 0;
          if (erode && !white) { result = false; break; }
          if (!erode && white) { result = true; break; }
        }
      }
      out(x, y) = result ? 255 : 0;
    }
  }
  return out;
}

}  // namespace detail

inline GrayImage erode(const GrayImage& img, const StructuringElement& k) {
  if (k.is_full_rectangle()) {
    return detail::separable(img, k.mask().width(), k.mask().height(), k.anchor_x(), k.anchor_y(), true);
  }
  return detail::generic(img, k, true);
}

inline GrayImage dilate(const GrayImage& img, const StructuringElement& k) {
  if (k.is_full_rectangle()) {
    return detail::separable(img, k.mask().width(), k.mask().height(), k.anchor_x(), k.anchor_y(), false);
  }
  return detail::generic(img, k, false);
}

/// Opening: erosion followed by dilation. Any nonzero input pixel counts as white.
inline GrayImage morphological_open(const GrayImage& img, const StructuringElement& k) {
  return dilate(erode(img, k), k);
}

// --- pipeline --------------------------------------------------------------

inline FilteredImage filter_image(const FrameSequence& seq, const FilterConfig& cfg = {}) {
  cfg.validate();
  seq.validate(cfg.sequence_length);
  return make_filtered_unchecked(
      morphological_open(binarize(frame_difference(seq), cfg.binarize_threshold), cfg.kernel()));
}

/// RGB entry point. Only the first and last frames contribute to the difference,
/// so the middle frames are validated but not converted.
inline FilteredImage filter_image(std::span<const TactileFrame> frames, const FilterConfig& cfg = {}) {
  cfg.validate();
  if (frames.size() != cfg.sequence_length) {
    throw Error(ErrorCode::structural, "frame window has " + std::to_string(frames.size()) +
                                           " frames, expected " + std::to_string(cfg.sequence_length));
  }
  for (std::size_t i = 1; i < frames.size(); ++i) {
    require_same_shape(frames[0].pixels, frames[i].pixels, "frame window");
    if (frames[i].unit != frames[0].unit) throw Error(ErrorCode::structural, "frame window mixes sensor units");
    if (frames[i].timestamp_ms <= frames[i - 1].timestamp_ms) {
      throw Error(ErrorCode::structural, "frame timestamps must be strictly increasing");
    }
  }
  const RgbImage& first = frames.front().pixels;
  const RgbImage& last = frames.back().pixels;
  GrayImage bin(first.width(), first.height());
  auto a = first.pixels(), b = last.pixels();
  auto o = bin.pixels();
  const int t = cfg.binarize_threshold;
  for (std::size_t i = 0; i < o.size(); ++i) {
    const int d = static_cast<int>(luma(a[i])) - static_cast<int>(luma(b[i]));
    o[i] = (d >= t || -d >= t) ? 255 : 0;
  }
  return make_filtered_unchecked(morphological_open(bin, cfg.kernel()));
}

inline FrameSequence to_sequence(std::span<const TactileFrame> frames) {
  FrameSequence seq;
  if (!frames.empty()) seq.unit = frames.front().unit;
  for (const auto& f : frames) {
    seq.frames.push_back(to_grayscale(f));
    seq.timestamps_ms.push_back(f.timestamp_ms);
  }
  return seq;
}

/// Mean pixel value.
inline double brightness(const GrayImage& img) {
  if (img.empty()) throw Error(ErrorCode::structural, "brightness of an empty image");
  const auto px = img.pixels();
  const std::uint64_t sum = std::accumulate(px.begin(), px.end(), std::uint64_t{0});
  return static_cast<double>(sum) / static_cast<double>(px.size());
}

inline double brightness(const FilteredImage& img) { return brightness(img.image()); }

}  // namespace vtgrasp
