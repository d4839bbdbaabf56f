#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "rndecomp/dataset.hpp"

namespace rndecomp {

/// ||a - x||^2 / ||x||^2.
inline double nmse(std::span<const double> a, std::span<const double> x) {
  if (a.size() != x.size()) throw Error("nmse: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - x[i]) * (a[i] - x[i]);
    den += x[i] * x[i];
  }
  if (num == 0.0) return 0.0;
  return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

/// Mean squared error after scaling [0, 1] data to the 8-bit range.
inline double mse_255(std::span<const double> a, std::span<const double> x) {
  if (a.size() != x.size()) throw Error("mse_255: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = 255.0 * a[i] - 255.0 * x[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 10 log10(255^2 / MSE) with MSE on the 8-bit scale; +inf when MSE is zero.
inline double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline double psnr(std::span<const double> a, std::span<const double> x) {
  return psnr_from_mse(mse_255(a, x));
}

/// |test loss - train loss|.
inline double generalization_error(double test_loss, double train_loss) {
  return std::abs(test_loss - train_loss);
}

struct MetricsRecord {
  std::vector<double> epoch_loss;
  double nmse = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ge = 0.0;
  double dc_gap = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double infer_ms = 0.0;
};

struct Reconstructions {
  std::vector<Tensor> outputs;
  double seconds = 0.0;
};

inline Reconstructions reconstruct_dataset(const Estimator& est, const Dataset& ds,
                                           std::size_t chunk = 16) {
  Reconstructions r;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < ds.size(); i += chunk) {
    std::vector<const Tensor*> ys;
    for (std::size_t j = i; j < std::min(ds.size(), i + chunk); ++j) ys.push_back(&ds.samples[j].y);
    for (Tensor& t : reconstruct_batch(est, ys)) r.outputs.push_back(std::move(t));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Mean ||A(y) - x||^2 / D over a dataset.
inline double empirical_loss(const std::vector<Tensor>& outputs, const Dataset& ds) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Tensor& a = outputs[i];
    const Tensor& x = ds.samples[i].x;
    s += squared_norm((a - x).values()) / static_cast<double>(x.size());
  }
  return s / static_cast<double>(ds.size());
}

/// Test-set quality plus the train/test loss gap.
inline MetricsRecord evaluate(const Estimator& est, const Dataset& test, const Dataset& train) {
  if (test.empty()) throw Error("evaluate: empty test set");
  if (train.empty()) throw Error("evaluate: empty dataset");
  MetricsRecord m;
  const Reconstructions rec = reconstruct_dataset(est, test);
  const Reconstructions rec_train = reconstruct_dataset(est, train);

  std::vector<double> psnrs;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Sample& s = test.samples[i];
    const Tensor& a = rec.outputs[i];
    m.nmse += nmse(a.values(), s.x.values());
    psnrs.push_back(psnr(a.values(), s.x.values()));
    const Tensor ha = est.op.apply(a);
    m.dc_gap += norm2((ha - s.y).values());
  }
  const double n = static_cast<double>(test.size());
  m.nmse /= n;
  m.dc_gap /= n;
  for (double p : psnrs) m.psnr_mean += p;
  m.psnr_mean /= n;
  if (std::isfinite(m.psnr_mean)) {
    for (double p : psnrs) m.psnr_std += (p - m.psnr_mean) * (p - m.psnr_mean);
    m.psnr_std = std::sqrt(m.psnr_std / n);
  }
  m.test_loss = empirical_loss(rec.outputs, test);
  m.train_loss = empirical_loss(rec_train.outputs, train);
  m.ge = generalization_error(m.test_loss, m.train_loss);
  m.infer_ms = 1000.0 * rec.seconds / n;
  return m;
}

}  // namespace rndecomp
