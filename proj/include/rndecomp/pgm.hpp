#pragma once

// Binary greyscale PGM (P5, maxval 255).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "rndecomp/tensor.hpp"

namespace rndecomp {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

namespace detail {

inline std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  if (tok.empty()) throw Error("pgm: truncated header in " + path);
  return tok;
}

}  // namespace detail

inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("pgm: cannot open " + path);
  if (detail::pgm_token(in, path) != "P5") throw Error("pgm: " + path + " is not a binary P5 file");
  GrayImage img;
  std::size_t maxval = 0;
  try {
    img.width = std::stoul(detail::pgm_token(in, path));
    img.height = std::stoul(detail::pgm_token(in, path));
    maxval = std::stoul(detail::pgm_token(in, path));
  } catch (const std::logic_error&) {
    throw Error("pgm: malformed header in " + path);
  }
  if (maxval != 255) throw Error("pgm: " + path + " has maxval " + std::to_string(maxval) + " (need 255)");
  if (img.width == 0 || img.height == 0) throw Error("pgm: " + path + " has zero size");
  in.get();  // single whitespace after maxval
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw Error("pgm: " + path + " has truncated pixel data");
  }
  return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  if (img.pixels.size() != img.width * img.height) throw Error("pgm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("pgm: cannot write " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error("pgm: write failed for " + path);
}

/// Clamps a [0,1] image (H x W) to 8 bits with rounding.
inline GrayImage to_gray(const Tensor& t) {
  if (t.rank() != 2) throw Error("to_gray: expected H x W tensor, got " + shape_string(t.shape()));
  GrayImage img{t.dim(1), t.dim(0), std::vector<std::uint8_t>(t.size())};
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = std::clamp(t[i], 0.0, 1.0) * 255.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return img;
}

inline Tensor from_gray(const GrayImage& img) {
  std::vector<double> v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.pixels[i] / 255.0;
  return Tensor(Shape{img.height, img.width}, std::move(v));
}

}  // namespace rndecomp
