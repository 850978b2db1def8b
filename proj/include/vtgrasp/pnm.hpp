#pragma once

// Binary Netpbm I/O: P5 (8- and 16-bit gray) and P6 (8-bit RGB).
// 16-bit samples are big-endian as the format requires.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "vtgrasp/error.hpp"
#include "vtgrasp/image.hpp"

namespace vtgrasp::pnm {

struct Header {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
};

namespace detail {

inline void skip_space_and_comments(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_header_int(std::istream& in) {
  skip_space_and_comments(in);
  int value = -1;
  if (!(in >> value) || value < 0) {
    throw Error(ErrorCode::parse, "pnm: bad header field");
  }
  return value;
}

}  // namespace detail

inline Header read_header(std::istream& in) {
  char p = 0;
  Header h;
  if (!in.get(p) || p != 'P' || !in.get(h.kind) || (h.kind != '5' && h.kind != '6')) {
    throw Error(ErrorCode::parse, "pnm: expected P5 or P6 magic");
  }
  h.width = detail::read_header_int(in);
  h.height = detail::read_header_int(in);
  h.maxval = detail::read_header_int(in);
  if (h.maxval < 1 || h.maxval > 65535) {
    throw Error(ErrorCode::parse, "pnm: maxval out of range");
  }
  // Exactly one whitespace byte separates the header from the raster.
  char sep = 0;
  if (!in.get(sep) || !std::isspace(static_cast<unsigned char>(sep))) {
    throw Error(ErrorCode::parse, "pnm: missing raster separator");
  }
  return h;
}

inline GrayImage read_pgm(std::istream& in) {
  const Header h = read_header(in);
  if (h.kind != '5' || h.maxval > 255) {
    throw Error(ErrorCode::parse, "pnm: expected 8-bit P5");
  }
  GrayImage img(h.width, h.height);
  auto px = img.pixels();
  if (!in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()))) {
    throw Error(ErrorCode::parse, "pnm: truncated raster");
  }
  return img;
}

inline DepthImage read_pgm16(std::istream& in) {
  const Header h = read_header(in);
  if (h.kind != '5') {
    throw Error(ErrorCode::parse, "pnm: expected P5");
  }
  DepthImage img(h.width, h.height);
  auto px = img.pixels();
  if (h.maxval <= 255) {
    for (auto& v : px) {
      int c = in.get();
      if (c == EOF) throw Error(ErrorCode::parse, "pnm: truncated raster");
      v = static_cast<std::uint16_t>(c);
    }
    return img;
  }
  for (auto& v : px) {
    int hi = in.get();
    int lo = in.get();
    if (lo == EOF || hi == EOF) throw Error(ErrorCode::parse, "pnm: truncated raster");
    v = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return img;
}

inline RgbImage read_ppm(std::istream& in) {
  const Header h = read_header(in);
  if (h.kind != '6' || h.maxval > 255) {
    throw Error(ErrorCode::parse, "pnm: expected 8-bit P6");
  }
  RgbImage img(h.width, h.height);
  static_assert(sizeof(Rgb8) == 3);
  auto px = img.pixels();
  if (!in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size() * 3))) {
    throw Error(ErrorCode::parse, "pnm: truncated raster");
  }
  return img;
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

inline void write_pgm16(std::ostream& out, const DepthImage& img) {
  out << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  for (std::uint16_t v : img.pixels()) {
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

inline void write_ppm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  auto px = img.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size() * 3));
}

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

}  // namespace detail

inline GrayImage load_pgm(const std::filesystem::path& p) { auto in = detail::open_in(p); return read_pgm(in); }
inline DepthImage load_pgm16(const std::filesystem::path& p) { auto in = detail::open_in(p); return read_pgm16(in); }
inline RgbImage load_ppm(const std::filesystem::path& p) { auto in = detail::open_in(p); return read_ppm(in); }

inline void save_pgm(const std::filesystem::path& p, const GrayImage& img) { auto out = detail::open_out(p); write_pgm(out, img); }
inline void save_pgm16(const std::filesystem::path& p, const DepthImage& img) { auto out = detail::open_out(p); write_pgm16(out, img); }
inline void save_ppm(const std::filesystem::path& p, const RgbImage& img) { auto out = detail::open_out(p); write_ppm(out, img); }

}  // namespace vtgrasp::pnm
