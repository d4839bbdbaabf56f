#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rndecomp/estimators.hpp"
#include "rndecomp/pgm.hpp"

namespace rndecomp {

enum class Split { train, test };

struct Dataset {
  std::vector<Sample> samples;
  Split split = Split::train;
  std::string provenance;
  double sigma = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::vector<const Sample*> view() const {
    std::vector<const Sample*> v;
    for (const Sample& s : samples) v.push_back(&s);
    return v;
  }

  /// Largest |y - H x - eps| over all samples.
  double regeneration_error(const LinearOperator& op) const {
    double worst = 0.0;
    for (const Sample& s : samples) {
      const Tensor hx = op.apply(s.x);
      for (std::size_t i = 0; i < hx.size(); ++i) {
        worst = std::max(worst, std::abs(s.y[i] - hx[i] - s.eps[i]));
      }
    }
    return worst;
  }
};

/// y = H x + eps with eps ~ N(0, sigma^2) i.i.d. from a seeded stream.
inline Dataset simulate_measurements(const LinearOperator& op, const std::vector<Tensor>& xs,
                                     double sigma, std::uint64_t seed,
                                     Split split = Split::train) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error("simulate_measurements: sigma must be finite and >= 0");
  }
  Dataset ds;
  ds.split = split;
  ds.sigma = sigma;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const Tensor& x : xs) {
    Tensor hx = op.apply(x);
    Tensor eps(hx.shape());
    if (sigma > 0.0) {
      for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = sigma * normal(rng);
    }
    ds.samples.push_back({x, hx + eps, std::move(eps)});
  }
  return ds;
}

namespace detail {

inline Tensor piecewise_image(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto index = [&](std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(unit(rng) * static_cast<double>(hi - lo + 1)) %
                    (hi - lo + 1);
  };
  const double ry = rows > 1 ? 1.0 / static_cast<double>(rows - 1) : 0.0;
  const double rx = cols > 1 ? 1.0 / static_cast<double>(cols - 1) : 0.0;

  Tensor img(Shape{rows, cols});
  const double a = uniform(0.2, 0.8), b = uniform(-0.2, 0.2), c = uniform(-0.2, 0.2);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < cols; ++x) img[r * cols + x] = a + b * r * ry + c * x * rx;
  }
  const std::size_t shapes = index(2, 5);
  for (std::size_t k = 0; k < shapes; ++k) {
    const std::size_t h = index(2, std::max<std::size_t>(2, rows / 2));
    const std::size_t w = index(2, std::max<std::size_t>(2, cols / 2));
    const std::size_t top = index(0, rows - std::min(h, rows));
    const std::size_t left = index(0, cols - std::min(w, cols));
    const double base = uniform(0.0, 1.0);
    const bool ramp = unit(rng) < 0.3;
    const double gy = ramp ? uniform(-0.3, 0.3) : 0.0, gx = ramp ? uniform(-0.3, 0.3) : 0.0;
    for (std::size_t r = top; r < std::min(rows, top + h); ++r) {
      for (std::size_t x = left; x < std::min(cols, left + w); ++x) {
        img[r * cols + x] = base + gy * (r - top) * ry * 4.0 + gx * (x - left) * rx * 4.0;
      }
    }
  }
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
  return img;
}

}  // namespace detail

/// Random rectangles over a linear ramp, values in [0, 1].
inline std::vector<Tensor> generate_piecewise_corpus(std::size_t count, std::size_t rows,
                                                     std::size_t cols, std::uint64_t seed) {
  if (rows < 8 || cols < 8) throw Error("generate_toy_corpus: image size must be at least 8x8");
  std::mt19937_64 rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(detail::piecewise_image(rows, cols, rng));
  return out;
}

/// First `count` PGM files of `dir` (sorted by name), rescaled to [0, 1] and
/// center-cropped to rows x cols.
inline std::vector<Tensor> load_pgm_corpus(const std::string& dir, std::size_t count,
                                           std::size_t rows, std::size_t cols) {
  if (rows < 8 || cols < 8) throw Error("generate_toy_corpus: image size must be at least 8x8");
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error("corpus directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < count) {
    throw Error("corpus " + dir + " has " + std::to_string(files.size()) + " PGM files, need " +
                std::to_string(count));
  }
  std::vector<Tensor> out;
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < count; ++i) {
    try {
      const GrayImage img = read_pgm(files[i].string());
      if (img.height < rows || img.width < cols) {
        bad.push_back(files[i].string() + " (smaller than crop)");
        continue;
      }
      const std::size_t top = (img.height - rows) / 2, left = (img.width - cols) / 2;
      Tensor t(Shape{rows, cols});
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          t[r * cols + c] = img.pixels[(top + r) * img.width + left + c] / 255.0;
        }
      }
      out.push_back(std::move(t));
    } catch (const Error& e) {
      bad.push_back(e.what());
    }
  }
  if (!bad.empty()) {
    std::string msg = "unreadable corpus files:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw Error(msg);
  }
  return out;
}

}  // namespace rndecomp
