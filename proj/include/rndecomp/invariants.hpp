#pragma once

// Property checks over operators, autodiff and estimators. Each check runs a
// batch of seeded random trials and reports the worst deviation observed.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rndecomp/gradcheck.hpp"
#include "rndecomp/metrics.hpp"

namespace rndecomp {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline CheckResult verdict(std::string name, double worst, double tol) {
  return {std::move(name), worst < tol, "worst " + sci(worst) + " (tol " + sci(tol) + ")"};
}

inline void randomize(Network& net, std::mt19937_64& rng, double scale) {
  Tensor p = random_tensor(net.params().shape(), rng, 1.0);
  // Per-layer scaling keeps activations O(1) through 64-channel layers.
  for (std::size_t i = 0; i < net.arch().size(); ++i) {
    const Layer& l = net.arch()[i];
    if (l.kind != Layer::Kind::conv) continue;
    const double s = scale / std::sqrt(static_cast<double>(l.in_ch * l.kernel * l.kernel));
    const std::size_t off = net.param_layout()[i];
    for (std::size_t j = 0; j < l.weight_count() + l.bias_count(); ++j) p[off + j] *= s;
  }
  net.set_params(std::move(p));
}

inline void zero(Network& net) { net.set_params(Tensor(net.params().shape())); }

}  // namespace detail

/// The four operator kinds on a rows x cols grid, as used by the suites.
inline std::vector<LinearOperator> reference_operators(std::size_t rows = 16, std::size_t cols = 16,
                                                       std::uint64_t seed = 3) {
  std::vector<LinearOperator> ops;
  const std::size_t domain = rows * cols;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pix(domain);
  for (std::size_t i = 0; i < domain; ++i) pix[i] = i;
  std::shuffle(pix.begin(), pix.end(), rng);
  std::vector<std::size_t> mask(pix.begin(), pix.begin() + static_cast<long>(domain / 2));
  std::sort(mask.begin(), mask.end());
  ops.push_back(build_operator({.kind = OperatorKind::inpainting, .domain = {rows, cols}, .mask = mask}));
  ops.push_back(build_operator({.kind = OperatorKind::block_downsample, .domain = {rows, cols}, .factor = 2}));
  std::vector<std::size_t> freqs;
  for (std::size_t f = 0; f < domain; ++f) {
    if (f < detail::conjugate_frequency(f, rows, cols) && rng() % 2 == 0) freqs.push_back(f);
  }
  ops.push_back(build_operator({.kind = OperatorKind::subsampled_dft, .domain = {rows, cols},
                                .frequencies = freqs}));
  ops.push_back(build_operator({.kind = OperatorKind::gaussian, .domain = {rows, cols},
                                .gauss_rows = domain / 4, .seed = seed}));
  return ops;
}

/// P_r + P_n = I (P_n is computed as x - P_r x), idempotence, P_r P_n = 0, H P_n = 0.
inline CheckResult check_projector_algebra(const LinearOperator& op, int trials = 100,
                                           std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  bool construction_exact = true;
  double worst_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Tensor x = detail::random_tensor(op.domain_shape(), rng);
    const Tensor pr = op.project_range(x);
    const Tensor pn = op.project_null(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (pn[i] != x[i] - pr[i]) construction_exact = false;
      // (x - p) + p may differ from x by one rounding.
      const double slack = 2.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(x[i]), std::abs(pr[i]));
      worst_sum = std::max(worst_sum, std::abs(pr[i] + pn[i] - x[i]) - slack);
    }
    worst = std::max(worst, max_abs_diff(op.project_range(pr).values(), pr.values()));
    worst = std::max(worst, max_abs_diff(op.project_null(pn).values(), pn.values()));
    worst = std::max(worst, max_abs(op.project_range(pn).values()));
    worst = std::max(worst, max_abs(op.apply(pn).values()));
  }
  CheckResult r = detail::verdict(std::string("projector algebra [") + operator_kind_name(op.kind()) + "]",
                                  worst, op.projector_tolerance());
  if (!construction_exact || worst_sum > 0.0) {
    r.passed = false;
    r.detail += "; P_r + P_n != I";
  }
  return r;
}

/// ||H H^+ y - y||_inf below the kind tolerance.
inline CheckResult check_right_inverse(const LinearOperator& op, int trials = 100,
                                       std::uint64_t seed = 12) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
    worst = std::max(worst, max_abs_diff(op.apply(op.pinv_apply(y)).values(), y.values()));
  }
  return detail::verdict(std::string("right inverse [") + operator_kind_name(op.kind()) + "]", worst,
                         op.right_inverse_tolerance());
}

/// S F F^H S^T = I on complex coefficient vectors.
inline CheckResult check_dft_identity(std::size_t rows = 16, std::size_t cols = 16, int trials = 20,
                                      std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < rows * cols; ++f) {
    if (rng() % 2) keep.push_back(f);
  }
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::vector<detail::Complex> spec(rows * cols, 0.0);
    std::vector<detail::Complex> y;
    for (std::size_t f : keep) {
      y.emplace_back(u(rng), u(rng));
      spec[f] = y.back();
    }
    const auto back = detail::unitary_dft2(detail::unitary_dft2(spec, rows, cols, +1), rows, cols, -1);
    for (std::size_t i = 0; i < keep.size(); ++i) worst = std::max(worst, std::abs(back[keep[i]] - y[i]));
  }
  return detail::verdict("subsampled DFT identity S F F^H S^T = I", worst, 1e-10);
}

/// x = a + b with a = H^+ u and b = P_n(c) is split back into (a, b).
inline CheckResult check_uniqueness(const LinearOperator& op, int trials = 100, std::uint64_t seed = 14) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Tensor a = op.pinv_apply(detail::random_tensor({op.codomain_size()}, rng));
    const Tensor b = op.project_null(detail::random_tensor(op.domain_shape(), rng));
    const Tensor x = a + b;
    worst = std::max(worst, max_abs_diff(op.project_range(x).values(), a.values()));
    worst = std::max(worst, max_abs_diff(op.project_null(x).values(), b.values()));
  }
  return detail::verdict(std::string("decomposition uniqueness [") + operator_kind_name(op.kind()) + "]",
                         worst, 1e-8);
}

inline CheckResult check_regularized_pinv(const LinearOperator& op, int trials = 5, std::uint64_t seed = 15) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
    const Tensor z = regularized_pinv(op, y, 1e-10, 1e-12, 5000);
    worst = std::max(worst, max_abs_diff(z.values(), op.pinv_apply(y).values()));
  }
  return detail::verdict(std::string("regularized pinv (lambda=1e-10) [") + operator_kind_name(op.kind()) +
                             "]",
                         worst, 1e-5);
}

inline CheckResult check_full_mask(std::size_t rows = 8, std::size_t cols = 8) {
  std::vector<std::size_t> all(rows * cols);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const LinearOperator op =
      build_operator({.kind = OperatorKind::inpainting, .domain = {rows, cols}, .mask = all});
  std::mt19937_64 rng(16);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Tensor x = detail::random_tensor(op.domain_shape(), rng);
    worst = std::max(worst, max_abs(op.project_null(x).values()));
    worst = std::max(worst, max_abs_diff(op.project_range(x).values(), x.values()));
  }
  return {"full-mask inpainting: P_r = I, P_n = 0", worst == 0.0, "worst " + detail::sci(worst)};
}

// ---------------------------------------------------------------------------
// Autodiff

namespace detail {

/// Gradient of sum(w * out) w.r.t. every input of one primitive, by tape and
/// by central differences. Returns the worst relative error.
inline double primitive_gradient_error(Primitive kind, const std::vector<Tensor>& inputs,
                                       const PrimitiveAttrs& attrs, std::mt19937_64& rng) {
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : inputs) ptrs.push_back(&t);
  const Tensor probe = evaluate_primitive(kind, ptrs, attrs);
  const Tensor weights = random_tensor(probe.shape(), rng);

  auto head = [&](const std::vector<Tensor>& in) {
    std::vector<const Tensor*> p;
    for (const Tensor& t : in) p.push_back(&t);
    const Tensor out = evaluate_primitive(kind, p, attrs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * out[i];
    return s;
  };

  Tape tape;
  std::vector<NodeId> ids;
  for (const Tensor& t : inputs) ids.push_back(tape.leaf(t));
  const NodeId out = tape.apply(kind, ids, attrs);
  const NodeId loss = tape.sum(tape.mul(out, tape.leaf(weights)));
  const GradientMap grads = tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto f = [&](const Tensor& x) {
      std::vector<Tensor> in = inputs;
      in[k] = x;
      return head(in);
    };
    worst = std::max(worst, relative_error(grads.at(ids[k]), finite_diff_gradient(f, inputs[k])));
  }
  return worst;
}

}  // namespace detail

/// Reverse-mode vs central differences for every primitive.
inline std::vector<CheckResult> check_primitive_gradients(int instances = 20, std::uint64_t seed = 21) {
  using detail::random_tensor;
  std::mt19937_64 rng(seed);
  const LinearOperator op = reference_operators(6, 6, 5)[1];
  struct Case {
    Primitive kind;
    std::function<std::vector<Tensor>()> inputs;
    PrimitiveAttrs attrs;
  };
  const std::vector<Case> cases = {
      {Primitive::add, [&] { return std::vector{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}; }, {}},
      {Primitive::sub, [&] { return std::vector{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}; }, {}},
      {Primitive::scale, [&] { return std::vector{random_tensor({5}, rng)}; }, {.scalar = -1.7}},
      {Primitive::mul, [&] { return std::vector{random_tensor({2, 5}, rng), random_tensor({2, 5}, rng)}; }, {}},
      {Primitive::matmul, [&] { return std::vector{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}; }, {}},
      {Primitive::conv2d,
       [&] { return std::vector{random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                                random_tensor({3}, rng)}; },
       {}},
      {Primitive::relu, [&] { return std::vector{random_tensor({4, 4}, rng)}; }, {}},
      {Primitive::reshape, [&] { return std::vector{random_tensor({2, 6}, rng)}; }, {.shape = {3, 4}}},
      {Primitive::sum, [&] { return std::vector{random_tensor({7}, rng)}; }, {}},
      {Primitive::mean, [&] { return std::vector{random_tensor({2, 3}, rng)}; }, {}},
      {Primitive::linear_map, [&] { return std::vector{random_tensor({2, 1, 6, 6}, rng)}; },
       {.map = op.map(Action::project_null, {1, 6, 6})}},
  };
  std::vector<CheckResult> results;
  for (const Case& c : cases) {
    double worst = 0.0;
    for (int i = 0; i < instances; ++i) {
      worst = std::max(worst, detail::primitive_gradient_error(c.kind, c.inputs(), c.attrs, rng));
    }
    results.push_back(detail::verdict(std::string("gradient oracle [") + primitive_name(c.kind) + "]",
                                      worst, 1e-4));
  }
  return results;
}

/// mse(F(x), t) for the 4-layer range network: gradient w.r.t. the input
/// (all coordinates) and a random subset of parameters.
inline CheckResult check_network_gradient(int instances = 20, std::uint64_t seed = 22,
                                          std::size_t param_probes = 24) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    Network net = Network::range_cnn(1, rng());
    const Tensor x = detail::random_tensor({1, 1, 5, 5}, rng);
    const Tensor target = detail::random_tensor({1, 1, 5, 5}, rng);
    auto loss_of = [&](const Network& n, const Tensor& in) {
      Tape tape;
      const auto b = n.bind(tape);
      return tape.value(tape.mse(n.forward(tape, b, tape.leaf(in)), tape.leaf(target))).item();
    };
    Tape tape;
    const auto bound = net.bind(tape);
    const NodeId in = tape.leaf(x);
    const GradientMap g = tape.backward(tape.mse(net.forward(tape, bound, in), tape.leaf(target)));

    worst = std::max(worst, relative_error(g.at(in), finite_diff_gradient(
                                                        [&](const Tensor& v) { return loss_of(net, v); }, x)));

    const Tensor grad_params = net.gather_gradient(g, bound);
    std::vector<std::size_t> probe(param_probes);
    for (auto& p : probe) p = rng() % net.param_count();
    Tensor picked(Shape{param_probes});
    for (std::size_t i = 0; i < param_probes; ++i) picked[i] = net.params()[probe[i]];
    Network work = net;
    const Tensor fd = finite_diff_gradient(
        [&](const Tensor& v) {
          Tensor p = net.params();
          for (std::size_t i = 0; i < param_probes; ++i) p[probe[i]] = v[i];
          work.set_params(std::move(p));
          return loss_of(work, x);
        },
        picked);
    Tensor analytic(Shape{param_probes});
    for (std::size_t i = 0; i < param_probes; ++i) analytic[i] = grad_params[probe[i]];
    // Duplicate probes see the same coordinate twice; finite differences agree.
    worst = std::max(worst, relative_error(analytic, fd));
  }
  return detail::verdict("gradient oracle [4-layer F network]", worst, 1e-4);
}

/// grad(a L1 + b L2) = a grad L1 + b grad L2.
inline CheckResult check_backward_linearity(int trials = 10, std::uint64_t seed = 23) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Tensor x = detail::random_tensor({1, 2, 4, 4}, rng);
    const Tensor w = detail::random_tensor({2, 2, 3, 3}, rng);
    const Tensor t1 = detail::random_tensor({1, 2, 4, 4}, rng);
    const double a = 0.7, b = -1.3;
    auto grad_for = [&](double ca, double cb) {
      Tape tape;
      const NodeId xi = tape.leaf(x);
      const NodeId y = tape.relu(tape.conv2d(xi, tape.leaf(w)));
      const NodeId l1 = tape.mse(y, tape.leaf(t1));
      const NodeId l2 = tape.sum(tape.mul(y, xi));
      const NodeId loss = tape.add(tape.scale(l1, ca), tape.scale(l2, cb));
      return tape.backward(loss).at(xi);
    };
    const Tensor both = grad_for(a, b);
    const Tensor combo = a * grad_for(1.0, 0.0) + b * grad_for(0.0, 1.0);
    worst = std::max(worst, max_abs_diff(both.values(), combo.values()));
  }
  return detail::verdict("backward linearity", worst, 1e-10);
}

// ---------------------------------------------------------------------------
// Estimators

inline Estimator random_estimator(Mechanism m, const LinearOperator& op, std::mt19937_64& rng,
                                  double scale = 1.0) {
  Estimator est = make_estimator(m, op, rng());
  if (est.f) detail::randomize(*est.f, rng, scale);
  if (est.g) detail::randomize(*est.g, rng, scale);
  return est;
}

/// Nullspace mechanism on noise-free data: ||H A(y) - y||_inf / ||y||_inf.
inline CheckResult check_nullspace_consistency(const LinearOperator& op, int draws = 10,
                                               std::uint64_t seed = 31) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < draws; ++t) {
    const Estimator est = random_estimator(Mechanism::nullspace, op, rng);
    const Tensor x = detail::random_tensor(op.domain_shape(), rng);
    const Tensor y = op.apply(x);
    const Tensor hx = op.apply(reconstruct(est, y));
    worst = std::max(worst, max_abs_diff(hx.values(), y.values()) / max_abs(y.values()));
  }
  return detail::verdict(std::string("nullspace data consistency [") + operator_kind_name(op.kind()) + "]",
                         worst, 1e-8);
}

inline CheckResult check_gated_equivalence(const LinearOperator& op, int trials = 100,
                                           std::uint64_t seed = 32) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Estimator est = random_estimator(Mechanism::ddn_independent, op, rng);
    const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
    worst = std::max(worst, max_abs_diff(gated_reconstruct(est, y).values(), reconstruct(est, y).values()));
  }
  return detail::verdict(std::string("gated equivalence [") + operator_kind_name(op.kind()) + "]", worst,
                         1e-10);
}

/// With H = I: ddn-cascade(y) == y + F(y) exactly and G gets zero gradient.
inline CheckResult check_degeneration(std::size_t rows = 8, std::size_t cols = 8, int trials = 5,
                                      std::uint64_t seed = 33) {
  std::vector<std::size_t> all(rows * cols);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const LinearOperator op =
      build_operator({.kind = OperatorKind::inpainting, .domain = {rows, cols}, .mask = all});
  std::mt19937_64 rng(seed);
  bool exact = true;
  double worst_g = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Estimator est = random_estimator(Mechanism::ddn_cascade, op, rng);
    const Tensor x = detail::random_tensor(op.domain_shape(), rng);
    const Tensor eps = detail::random_tensor({op.codomain_size()}, rng, 0.1);
    const Tensor y = op.apply(x) + eps;
    const Tensor out = reconstruct(est, y);
    const Tensor fy = est.f->forward(y.reshaped({1, 1, rows, cols}));
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] != y[i] + fy[i]) exact = false;
    }
    const Sample s{x, y, eps};
    const LossResult loss = ddn_loss(est, {&s}, LossWeights{1.0, 0.0});
    worst_g = std::max(worst_g, max_abs(loss.grad_g.values()));
  }
  return {"degeneration H = I: cascade == y + F(y), G gradient zero", exact && worst_g == 0.0,
          std::string(exact ? "bit-identical" : "outputs differ") + ", max |grad G| " + detail::sci(worst_g)};
}

/// data_consistency_gap == ||H F(H^+ y)||_2 for ddn mechanisms.
inline CheckResult check_relaxed_consistency(const LinearOperator& op, int trials = 20,
                                             std::uint64_t seed = 34) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Mechanism m = t % 2 ? Mechanism::ddn_cascade : Mechanism::ddn_independent;
    const Estimator est = random_estimator(m, op, rng, 0.5);
    const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
    const Tensor z = op.pinv_apply(y);
    Shape batch{1};
    for (std::size_t d : est.image_shape()) batch.push_back(d);
    const Tensor fz = est.f->forward(z.reshaped(batch)).reshaped(op.domain_shape());
    worst = std::max(worst, std::abs(data_consistency_gap(est, y) - norm2(op.apply(fz).values())));
  }
  return detail::verdict(std::string("relaxed consistency identity [") + operator_kind_name(op.kind()) + "]",
                         worst, 1e-10);
}

/// Zero networks: every mechanism returns a finite, y-dependent value (z for
/// all but npgd, whose output collapses to the zero network's output).
inline CheckResult check_zero_networks(const LinearOperator& op, int trials = 100, std::uint64_t seed = 35) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  bool finite = true;
  for (Mechanism m : {Mechanism::pinv, Mechanism::residual, Mechanism::nullspace, Mechanism::npgd,
                      Mechanism::ddn_independent, Mechanism::ddn_cascade, Mechanism::ddn_range}) {
    Estimator est = make_estimator(m, op, 1);
    if (est.f) detail::zero(*est.f);
    if (est.g) detail::zero(*est.g);
    for (int t = 0; t < trials / 10; ++t) {
      const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
      const Tensor out = reconstruct(est, y);
      for (double v : out.values()) finite = finite && std::isfinite(v);
      if (m != Mechanism::npgd) worst = std::max(worst, max_abs_diff(out.values(), op.pinv_apply(y).values()));
    }
  }
  CheckResult r = detail::verdict("zero networks reduce to H^+ y", worst, 1e-15);
  r.passed = r.passed && finite;
  return r;
}

inline CheckResult check_forward_determinism(std::uint64_t seed = 36) {
  std::mt19937_64 rng(seed);
  const LinearOperator op = reference_operators(8, 8, 4)[1];
  const Estimator est = random_estimator(Mechanism::ddn_cascade, op, rng);
  const Tensor y = detail::random_tensor({op.codomain_size()}, rng);
  const bool same = reconstruct(est, y) == reconstruct(est, y);
  return {"forward determinism", same, same ? "bit-identical" : "outputs differ"};
}

inline CheckResult check_dataset_regeneration(const LinearOperator& op, std::uint64_t seed = 37) {
  const auto& shape = op.domain_shape();
  const auto xs = generate_piecewise_corpus(8, shape[0], shape.size() > 1 ? shape[1] : shape[0], seed);
  const Dataset ds = simulate_measurements(op, xs, 0.1, seed);
  return detail::verdict(std::string("dataset regeneration [") + operator_kind_name(op.kind()) + "]",
                         ds.regeneration_error(op), 1e-12);
}

inline CheckResult check_metrics() {
  std::mt19937_64 rng(38);
  const Tensor x = detail::random_tensor({64}, rng);
  bool ok = nmse(x.values(), x.values()) == 0.0 && std::isinf(psnr(x.values(), x.values()));
  double prev = std::numeric_limits<double>::infinity();
  for (double mse = 1e-3; mse < 1e4; mse *= 3.0) {
    const double p = psnr_from_mse(mse);
    ok = ok && p < prev;
    prev = p;
  }
  ok = ok && generalization_error(0.3, 0.1) == generalization_error(0.1, 0.3);
  return {"metric properties (NMSE(x,x)=0, PSNR monotone, GE symmetric)", ok, ok ? "ok" : "violated"};
}

/// Every fast property check, in a fixed order.
inline std::vector<CheckResult> run_invariant_suite() {
  std::vector<CheckResult> out;
  const auto ops = reference_operators();
  for (const auto& op : ops) out.push_back(check_projector_algebra(op));
  for (const auto& op : ops) out.push_back(check_right_inverse(op));
  out.push_back(check_dft_identity());
  for (const auto& op : ops) out.push_back(check_uniqueness(op));
  for (const auto& op : ops) out.push_back(check_regularized_pinv(op));
  out.push_back(check_full_mask());
  for (auto& r : check_primitive_gradients()) out.push_back(std::move(r));
  out.push_back(check_network_gradient());
  out.push_back(check_backward_linearity());
  for (const auto& op : ops) out.push_back(check_nullspace_consistency(op));
  out.push_back(check_gated_equivalence(ops[1]));
  out.push_back(check_gated_equivalence(ops[2], 20));
  out.push_back(check_degeneration());
  for (const auto& op : ops) out.push_back(check_relaxed_consistency(op, 6));
  out.push_back(check_zero_networks(ops[0]));
  out.push_back(check_forward_determinism());
  for (const auto& op : ops) out.push_back(check_dataset_regeneration(op));
  out.push_back(check_metrics());
  return out;
}

}  // namespace rndecomp
