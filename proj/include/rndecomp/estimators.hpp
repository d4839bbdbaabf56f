#pragma once

// Reconstruction mechanisms binding networks F, G to a forward operator.
//
// With z = H^+ y:
//   pinv             z
//   residual         z + G(F(z))
//   nullspace        z + P_n(G(F(z)))
//   npgd             K steps of z <- G(F(z - eta H^T (H z - y)))
//   ddn-independent  z + P_r(F(z)) + P_n(G(z))
//   ddn-cascade      u + P_n(G(u)),  u = z + P_r(F(z))
//   ddn-range        z + P_r(F(z))            (range-only ablation variant)

#include <optional>
#include <string>
#include <vector>

#include "rndecomp/linops.hpp"
#include "rndecomp/network.hpp"

namespace rndecomp {

enum class Mechanism { pinv, residual, nullspace, npgd, ddn_independent, ddn_cascade, ddn_range };

inline const char* mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::pinv: return "pinv";
    case Mechanism::residual: return "residual";
    case Mechanism::nullspace: return "nullspace";
    case Mechanism::npgd: return "npgd";
    case Mechanism::ddn_independent: return "ddn-independent";
    case Mechanism::ddn_cascade: return "ddn-cascade";
    case Mechanism::ddn_range: return "ddn-range";
  }
  return "unknown";
}

inline Mechanism parse_mechanism(const std::string& s) {
  for (Mechanism m : {Mechanism::pinv, Mechanism::residual, Mechanism::nullspace, Mechanism::npgd,
                      Mechanism::ddn_independent, Mechanism::ddn_cascade, Mechanism::ddn_range}) {
    if (s == mechanism_name(m)) return m;
  }
  throw Error("unknown mechanism '" + s + "'");
}

/// Mechanisms whose F output is a standalone range correction, so the
/// range-discrepancy penalty applies to it.
inline bool has_range_branch(Mechanism m) {
  return m == Mechanism::ddn_independent || m == Mechanism::ddn_cascade ||
         m == Mechanism::ddn_range;
}
inline bool is_ddn(Mechanism m) {
  return m == Mechanism::ddn_independent || m == Mechanism::ddn_cascade;
}
inline bool uses_f(Mechanism m) { return m != Mechanism::pinv; }
inline bool uses_g(Mechanism m) { return m != Mechanism::pinv && m != Mechanism::ddn_range; }

struct LossWeights {
  double range = 1.0;         // lambda_1: weight of ||H F(H^+ y) + eps||^2 / d
  double weight_decay = 1e-4; // lambda_2: decoupled decay on G

  void validate() const {
    if (!(std::isfinite(range) && range >= 0.0 && std::isfinite(weight_decay) &&
          weight_decay >= 0.0)) {
      throw Error("LossWeights: weights must be finite and non-negative");
    }
  }
};

struct Estimator {
  Mechanism mechanism = Mechanism::pinv;
  LinearOperator op;
  std::optional<Network> f;
  std::optional<Network> g;
  int npgd_steps = 3;
  double npgd_step = 1.0;

  /// Per-sample image shape seen by the networks: 1 x H x W (or 1 x 1 x L).
  Shape image_shape() const {
    const Shape& d = op.domain_shape();
    return d.size() == 1 ? Shape{1, 1, d[0]} : Shape{1, d[0], d[1]};
  }

  void validate() const {
    if (uses_f(mechanism) && !f) {
      throw Error(std::string("estimator ") + mechanism_name(mechanism) + ": F network missing");
    }
    if (uses_g(mechanism) && !g) {
      throw Error(std::string("estimator ") + mechanism_name(mechanism) + ": G network missing");
    }
    if (mechanism == Mechanism::npgd && npgd_steps < 1) {
      throw Error("estimator npgd: needs at least one step");
    }
  }
};

/// Builds an estimator with freshly initialised networks (range_cnn for F,
/// skip_cnn for G) and eta = 1 / ||H^T H|| for npgd.
inline Estimator make_estimator(Mechanism m, LinearOperator op, std::uint64_t seed) {
  Estimator est{m, std::move(op), std::nullopt, std::nullopt};
  if (uses_f(m)) est.f = Network::range_cnn(1, seed * 2 + 11);
  if (uses_g(m)) est.g = Network::skip_cnn(1, seed * 2 + 12);
  if (m == Mechanism::npgd) {
    const double l = normal_operator_norm(est.op, 20, 7);
    est.npgd_step = l > 0.0 ? 1.0 / l : 1.0;
  }
  return est;
}

/// Network parameters bound as tape leaves for one pass.
struct BoundNetworks {
  std::optional<Network::Bound> f;
  std::optional<Network::Bound> g;
};

inline BoundNetworks bind_networks(const Estimator& est, Tape& tape) {
  BoundNetworks b;
  if (est.f) b.f = est.f->bind(tape);
  if (est.g) b.g = est.g->bind(tape);
  return b;
}

struct ReconstructionNodes {
  NodeId output;           // N x 1 x H x W
  NodeId z;                // H^+ y, same shape
  std::optional<NodeId> f_of_z;
};

/// Records A(y) for a batch of measurements y (N x d).
inline ReconstructionNodes record_reconstruction(const Estimator& est, Tape& tape,
                                                 const BoundNetworks& nets, NodeId y) {
  est.validate();
  const Shape img = est.image_shape();
  const LinearOperator& op = est.op;
  const NodeId z = tape.linear(op.map(Action::pinv, img), y);
  auto F = [&](NodeId in) { return est.f->forward(tape, *nets.f, in); };
  auto G = [&](NodeId in) { return est.g->forward(tape, *nets.g, in); };
  auto Pr = [&](NodeId in) { return tape.linear(op.map(Action::project_range, img), in); };
  auto Pn = [&](NodeId in) { return tape.linear(op.map(Action::project_null, img), in); };

  ReconstructionNodes out{z, z, std::nullopt};
  switch (est.mechanism) {
    case Mechanism::pinv:
      break;
    case Mechanism::residual:
      out.output = tape.add(z, G(F(z)));
      break;
    case Mechanism::nullspace:
      out.output = tape.add(z, Pn(G(F(z))));
      break;
    case Mechanism::npgd: {
      NodeId zk = z;
      const auto fwd = op.map(Action::forward);
      const auto adj = op.map(Action::adjoint, img);
      for (int k = 0; k < est.npgd_steps; ++k) {
        const NodeId residual = tape.sub(tape.linear(fwd, zk), y);
        const NodeId step = tape.sub(zk, tape.scale(tape.linear(adj, residual), est.npgd_step));
        zk = G(F(step));
      }
      out.output = zk;
      break;
    }
    case Mechanism::ddn_independent: {
      const NodeId fz = F(z);
      out.f_of_z = fz;
      out.output = tape.add(tape.add(z, Pr(fz)), Pn(G(z)));
      break;
    }
    case Mechanism::ddn_cascade: {
      const NodeId fz = F(z);
      out.f_of_z = fz;
      const NodeId u = tape.add(z, Pr(fz));
      out.output = tape.add(u, Pn(G(u)));
      break;
    }
    case Mechanism::ddn_range: {
      const NodeId fz = F(z);
      out.f_of_z = fz;
      out.output = tape.add(z, Pr(fz));
      break;
    }
  }
  return out;
}

/// Stacks flat tensors into an N x (rest) batch.
inline Tensor stack(const std::vector<const Tensor*>& items, const Shape& sample_shape) {
  if (items.empty()) throw Error("stack: empty batch");
  const std::size_t n = shape_size(sample_shape);
  std::vector<double> data;
  data.reserve(items.size() * n);
  for (const Tensor* t : items) {
    if (t->size() != n) {
      throw Error("stack: expected " + std::to_string(n) + " entries, got " +
                  std::to_string(t->size()));
    }
    data.insert(data.end(), t->values().begin(), t->values().end());
  }
  Shape s{items.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  return Tensor(std::move(s), std::move(data));
}

/// Reconstructs a batch of measurements (N x d) -> N x D (flat per sample).
inline std::vector<Tensor> reconstruct_batch(const Estimator& est,
                                             const std::vector<const Tensor*>& ys) {
  Tape tape;
  const BoundNetworks nets = bind_networks(est, tape);
  const NodeId y = tape.leaf(stack(ys, {est.op.codomain_size()}));
  const Tensor& out = tape.value(record_reconstruction(est, tape, nets, y).output);
  std::vector<Tensor> result;
  const std::size_t d = est.op.domain_size();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    result.emplace_back(est.op.domain_shape(),
                        std::vector<double>(out.values().begin() + i * d,
                                            out.values().begin() + (i + 1) * d));
  }
  return result;
}

inline Tensor reconstruct(const Estimator& est, const Tensor& y) {
  if (y.size() != est.op.codomain_size()) {
    throw Error("reconstruct: expected measurement of dimension " +
                std::to_string(est.op.codomain_size()) + ", got " + std::to_string(y.size()));
  }
  return std::move(reconstruct_batch(est, {&y}).front());
}

/// T F(z) + (I - T) G(z) + z with T = H^+ H, evaluated with direct operator
/// calls rather than through the tape.
inline Tensor gated_reconstruct(const Estimator& est, const Tensor& y) {
  if (est.mechanism != Mechanism::ddn_independent) {
    throw Error("gated_reconstruct: requires the ddn-independent mechanism");
  }
  est.validate();
  const LinearOperator& op = est.op;
  const Tensor z = op.pinv_apply(y);
  Shape batch{1};
  for (std::size_t d : est.image_shape()) batch.push_back(d);
  const Tensor fz = est.f->forward(z.reshaped(batch)).reshaped(op.domain_shape());
  const Tensor gz = est.g->forward(z.reshaped(batch)).reshaped(op.domain_shape());
  const Tensor t_fz = op.pinv_apply(op.apply(fz));
  const Tensor t_gz = op.pinv_apply(op.apply(gz));
  Tensor out(op.domain_shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = t_fz[i] + (gz[i] - t_gz[i]) + z[i];
  }
  return out;
}

/// ||H A(y) - y||_2.
inline double data_consistency_gap(const Estimator& est, const Tensor& y) {
  const Tensor hx = est.op.apply(reconstruct(est, y));
  double s = 0.0;
  for (std::size_t i = 0; i < hx.size(); ++i) s += (hx[i] - y[i]) * (hx[i] - y[i]);
  return std::sqrt(s);
}

/// One training example: clean signal, its measurement and the noise drawn.
struct Sample {
  Tensor x;
  Tensor y;
  Tensor eps;
};

struct LossResult {
  double loss = 0.0;        // empirical + lambda_1 phi_1 + lambda_2 phi_2
  double empirical = 0.0;   // mean ||A(y) - x||^2 / D
  double range_term = 0.0;  // mean ||H F(H^+ y) + eps||^2 / d (0 when not applicable)
  double decay_term = 0.0;  // ||G params||^2
  Tensor grad_f;            // empty when the mechanism has no F
  Tensor grad_g;
};

/// Joint objective and its gradient w.r.t. both networks. The weight-decay
/// term is reported but realised by the optimiser on G.
inline LossResult ddn_loss(const Estimator& est, const std::vector<const Sample*>& batch,
                           const LossWeights& w) {
  if (batch.empty()) throw Error("ddn_loss: empty batch");
  w.validate();
  std::vector<const Tensor*> xs, ys, es;
  for (const Sample* s : batch) {
    xs.push_back(&s->x);
    ys.push_back(&s->y);
    es.push_back(&s->eps);
  }
  Shape img = est.image_shape();
  Tape tape;
  const BoundNetworks nets = bind_networks(est, tape);
  const NodeId y = tape.leaf(stack(ys, {est.op.codomain_size()}));
  const NodeId x = tape.leaf(stack(xs, img));
  const ReconstructionNodes rec = record_reconstruction(est, tape, nets, y);

  const NodeId empirical = tape.mse(rec.output, x);
  NodeId loss = empirical;
  std::optional<NodeId> range_term;
  if (rec.f_of_z && w.range > 0.0) {
    const NodeId eps = tape.leaf(stack(es, {est.op.codomain_size()}));
    // F targets P_r(x) - H^+ y = -H^+ eps, so H F is matched against -eps.
    const NodeId hf = tape.linear(est.op.map(Action::forward), *rec.f_of_z);
    range_term = tape.mean(tape.mul(tape.add(hf, eps), tape.add(hf, eps)));
    loss = tape.add(loss, tape.scale(*range_term, w.range));
  }
  const GradientMap grads = tape.backward(loss);

  LossResult r;
  r.empirical = tape.value(empirical).item();
  r.range_term = range_term ? tape.value(*range_term).item() : 0.0;
  r.decay_term = est.g ? squared_norm(est.g->params().values()) : 0.0;
  r.loss = tape.value(loss).item() + w.weight_decay * r.decay_term;
  if (est.f) r.grad_f = est.f->gather_gradient(grads, *nets.f);
  if (est.g) r.grad_g = est.g->gather_gradient(grads, *nets.g);
  return r;
}

}  // namespace rndecomp
