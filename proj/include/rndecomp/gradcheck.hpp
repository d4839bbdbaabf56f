#pragma once

#include <functional>

#include "rndecomp/tensor.hpp"

namespace rndecomp {

/// Central-difference gradient of a scalar function, one coordinate at a time.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                                   const Tensor& x, double h = 1e-5) {
  if (!(h > 0.0)) throw Error("finite_diff_gradient: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// max |a - b| / max(max |a|, max |b|, floor). Used to compare gradients.
inline double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8) {
  const double scale = std::max({max_abs(a.values()), max_abs(b.values()), floor});
  return max_abs_diff(a.values(), b.values()) / scale;
}

}  // namespace rndecomp
