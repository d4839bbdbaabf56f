#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "rndecomp/dataset.hpp"
#include "rndecomp/optimizer.hpp"

namespace rndecomp {

enum class TrainingMode { joint, decoupled };

struct TrainOptions {
  std::size_t epochs = 500;
  std::size_t batch = 8;
  double lr = 1e-3;
  LossWeights weights;
  TrainingMode mode = TrainingMode::joint;
  std::uint64_t seed = 0;
};

struct TrainReport {
  /// Mean training loss per epoch (decoupled mode: F pass, then G pass).
  std::vector<double> epoch_loss;
};

namespace detail {

// Seeded Fisher-Yates over sample indices; one stream across epochs.
class EpochOrder {
 public:
  EpochOrder(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  }
  const std::vector<std::size_t>& next() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng_() % i);
      std::swap(order_[i - 1], order_[j]);
    }
    return order_;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
};

inline void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw Error("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                std::to_string(loss) + ")");
  }
}

template <class StepFn>
void run_epochs(const Dataset& ds, const TrainOptions& opt, std::uint64_t seed, StepFn&& step,
                std::vector<double>& log) {
  EpochOrder order(ds.size(), seed);
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto& idx = order.next();
    double total = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += opt.batch) {
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < std::min(idx.size(), start + opt.batch); ++k) {
        batch.push_back(&ds.samples[idx[k]]);
      }
      double loss = 0.0;
      try {
        loss = step(batch);
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      check_finite_loss(loss, epoch);
      total += loss * static_cast<double>(batch.size());
    }
    log.push_back(total / static_cast<double>(ds.size()));
  }
}

}  // namespace detail

/// Trains the estimator's networks in place with Adam. G receives decoupled
/// weight decay lambda_2; F is never decayed.
inline TrainReport train(Estimator& est, const Dataset& ds, const TrainOptions& opt) {
  if (est.mechanism == Mechanism::pinv) throw Error("train: the pinv mechanism has no parameters");
  if (ds.empty()) throw Error("train: empty dataset");
  if (opt.batch == 0) throw Error("train: batch size must be positive");
  if (opt.mode == TrainingMode::decoupled && !is_ddn(est.mechanism)) {
    throw Error(std::string("train: decoupled mode requires a ddn mechanism, got ") +
                mechanism_name(est.mechanism));
  }
  est.validate();
  opt.weights.validate();

  const AdamHyper f_hyper{.lr = opt.lr};
  const AdamHyper g_hyper{.lr = opt.lr, .weight_decay = opt.weights.weight_decay};
  AdamState f_state, g_state;
  TrainReport report;

  if (opt.mode == TrainingMode::joint) {
    detail::run_epochs(
        ds, opt, opt.seed,
        [&](const std::vector<const Sample*>& batch) {
          const LossResult r = ddn_loss(est, batch, opt.weights);
          if (est.f) adam_step(est.f->params(), r.grad_f, f_state, f_hyper, false);
          if (est.g) adam_step(est.g->params(), r.grad_g, g_state, g_hyper, true);
          return r.loss;
        },
        report.epoch_loss);
    return report;
  }

  // Decoupled: F against the range residual P_r(x) - z, then G against P_n(x).
  const LinearOperator& op = est.op;
  const Shape img = est.image_shape();
  const Shape meas{op.codomain_size()};
  auto targets = [&](const std::vector<const Sample*>& batch, bool range) {
    std::vector<Tensor> t;
    for (const Sample* s : batch) {
      t.push_back(range ? op.project_range(s->x) - op.pinv_apply(s->y) : op.project_null(s->x));
    }
    return t;
  };
  auto pointers = [](const std::vector<Tensor>& v) {
    std::vector<const Tensor*> p;
    for (const Tensor& t : v) p.push_back(&t);
    return p;
  };

  detail::run_epochs(
      ds, opt, opt.seed,
      [&](const std::vector<const Sample*>& batch) {
        std::vector<const Tensor*> ys, es;
        for (const Sample* s : batch) {
          ys.push_back(&s->y);
          es.push_back(&s->eps);
        }
        const auto tgt = targets(batch, true);
        Tape tape;
        const Network::Bound fb = est.f->bind(tape);
        const NodeId y = tape.leaf(stack(ys, meas));
        const NodeId z = tape.linear(op.map(Action::pinv, img), y);
        const NodeId fz = est.f->forward(tape, fb, z);
        NodeId loss = tape.mse(tape.linear(op.map(Action::project_range, img), fz),
                               tape.leaf(stack(pointers(tgt), img)));
        if (opt.weights.range > 0.0) {
          const NodeId hf = tape.linear(op.map(Action::forward), fz);
          const NodeId miss = tape.add(hf, tape.leaf(stack(es, meas)));
          const NodeId range_term = tape.mean(tape.mul(miss, miss));
          loss = tape.add(loss, tape.scale(range_term, opt.weights.range));
        }
        const GradientMap grads = tape.backward(loss);
        adam_step(est.f->params(), est.f->gather_gradient(grads, fb), f_state, f_hyper, false);
        return tape.value(loss).item();
      },
      report.epoch_loss);

  detail::run_epochs(
      ds, opt, opt.seed + 1,
      [&](const std::vector<const Sample*>& batch) {
        std::vector<const Tensor*> ys;
        for (const Sample* s : batch) ys.push_back(&s->y);
        const auto tgt = targets(batch, false);
        Tape tape;
        const NodeId y = tape.leaf(stack(ys, meas));
        NodeId input = tape.linear(op.map(Action::pinv, img), y);
        if (est.mechanism == Mechanism::ddn_cascade) {
          const Network::Bound fb = est.f->bind(tape);
          input = tape.add(input, tape.linear(op.map(Action::project_range, img),
                                              est.f->forward(tape, fb, input)));
          input = tape.leaf(tape.value(input));  // F is frozen in this pass
        }
        const Network::Bound gb = est.g->bind(tape);
        const NodeId loss = tape.mse(
            tape.linear(op.map(Action::project_null, img), est.g->forward(tape, gb, input)),
            tape.leaf(stack(pointers(tgt), img)));
        const GradientMap grads = tape.backward(loss);
        adam_step(est.g->params(), est.g->gather_gradient(grads, gb), g_state, g_hyper, true);
        return tape.value(loss).item() +
               opt.weights.weight_decay * squared_norm(est.g->params().values());
      },
      report.epoch_loss);
  return report;
}

}  // namespace rndecomp
