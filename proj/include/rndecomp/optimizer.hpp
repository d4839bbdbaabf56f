#pragma once

#include <cmath>

#include "rndecomp/tensor.hpp"

namespace rndecomp {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// One Adam step with decoupled weight decay (applied only when `decayable`).
inline void adam_step(Tensor& params, const Tensor& grads, AdamState& state,
                      const AdamHyper& hyper, bool decayable) {
  if (params.shape() != grads.shape()) {
    throw Error("adam_step: params " + shape_string(params.shape()) + " vs grads " +
                shape_string(grads.shape()));
  }
  if (!(hyper.lr > 0.0)) throw Error("adam_step: learning rate must be positive");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  const double decay = decayable ? 1.0 - hyper.lr * hyper.weight_decay : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] = params[i] * decay - hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

}  // namespace rndecomp
