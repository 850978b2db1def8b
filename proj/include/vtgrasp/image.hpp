#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vtgrasp/error.hpp"

namespace vtgrasp {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Dense row-major image with top-left origin.
template <typename Pixel>
class Image {
 public:
  using pixel_type = Pixel;

  Image() = default;
  Image(int width, int height, Pixel fill = Pixel{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::structural, "negative image dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Pixel& operator()(int x, int y) { return data_[index(x, y)]; }
  const Pixel& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<Pixel> pixels() noexcept { return data_; }
  std::span<const Pixel> pixels() const noexcept { return data_; }

  std::span<Pixel> row(int y) { return std::span<Pixel>(data_).subspan(index(0, y), width_); }
  std::span<const Pixel> row(int y) const {
    return std::span<const Pixel>(data_).subspan(index(0, y), width_);
  }

  template <typename Other>
  bool same_shape(const Image<Other>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> data_;
};

using RgbImage = Image<Rgb8>;
using GrayImage = Image<std::uint8_t>;
using DepthImage = Image<std::uint16_t>;  // millimetres, 0 = no return

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::structural, std::string(what) + ": image dimensions differ");
  }
}

}  // namespace vtgrasp
