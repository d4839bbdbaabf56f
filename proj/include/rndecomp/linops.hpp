#pragma once

// Linear forward operators with exact right inverses, and the range/nullspace
// projectors they induce.
//
// Every operator maps a signal of `domain_shape` (D entries) to a flat
// measurement vector of d <= D entries and carries the Moore-Penrose right
// inverse, so H(H^+ y) = y holds up to rounding.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rndecomp/svd.hpp"
#include "rndecomp/tape.hpp"

namespace rndecomp {

enum class OperatorKind { inpainting, block_downsample, subsampled_dft, gaussian };

inline const char* operator_kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::inpainting: return "inpainting";
    case OperatorKind::block_downsample: return "block_downsample";
    case OperatorKind::subsampled_dft: return "subsampled_dft";
    case OperatorKind::gaussian: return "gaussian";
  }
  return "unknown";
}

/// Declarative description of an operator. Only the fields of `kind` are read.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::inpainting;
  Shape domain;                            // rank 1 or 2
  std::vector<std::size_t> mask;           // inpainting: kept flat indices
  std::size_t factor = 2;                  // block_downsample
  std::vector<std::size_t> frequencies;    // subsampled_dft: kept flat frequency indices
  std::size_t gauss_rows = 0;              // gaussian: d
  std::uint64_t seed = 0;                  // gaussian
};

/// Which linear action of an operator to expose as a tape primitive.
enum class Action { forward, adjoint, pinv, project_range, project_null };

namespace detail {

using Complex = std::complex<double>;

class OperatorImpl {
 public:
  virtual ~OperatorImpl() = default;
  virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
  virtual void adjoint(std::span<const double> y, std::span<double> x) const = 0;
  virtual void pinv(std::span<const double> y, std::span<double> x) const = 0;
  virtual void pinv_adjoint(std::span<const double> x, std::span<double> y) const = 0;
  virtual std::string describe() const = 0;

  OperatorKind kind;
  Shape domain;
  std::size_t domain_size = 0;
  std::size_t codomain_size = 0;
};

class Inpainting final : public OperatorImpl {
 public:
  explicit Inpainting(std::vector<std::size_t> keep) : keep_(std::move(keep)) {}
  void apply(std::span<const double> x, std::span<double> y) const override {
    for (std::size_t i = 0; i < keep_.size(); ++i) y[i] = x[keep_[i]];
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < keep_.size(); ++i) x[keep_[i]] = y[i];
  }
  void pinv(std::span<const double> y, std::span<double> x) const override { adjoint(y, x); }
  void pinv_adjoint(std::span<const double> x, std::span<double> y) const override {
    apply(x, y);
  }
  std::string describe() const override {
    return "inpainting keep=" + std::to_string(keep_.size()) + "/" + std::to_string(domain_size);
  }

 private:
  std::vector<std::size_t> keep_;
};

// Averages non-overlapping s x s (or length-s) blocks. H H^T = I / block, so
// the right inverse is block * H^T.
class BlockDownsample final : public OperatorImpl {
 public:
  BlockDownsample(std::size_t rows, std::size_t cols, std::size_t factor)
      : rows_(rows), cols_(cols), fr_(rows == 1 ? 1 : factor), fc_(factor) {}

  void apply(std::span<const double> x, std::span<double> y) const override {
    const std::size_t oc = cols_ / fc_;
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) y[(r / fr_) * oc + c / fc_] += x[r * cols_ + c];
    }
    const double inv = 1.0 / block();
    for (double& v : y) v *= inv;
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    spread(y, x, 1.0 / block());
  }
  void pinv(std::span<const double> y, std::span<double> x) const override { spread(y, x, 1.0); }
  void pinv_adjoint(std::span<const double> x, std::span<double> y) const override {
    apply(x, y);
    for (double& v : y) v *= block();
  }
  std::string describe() const override {
    return "block_downsample factor=" + std::to_string(fc_) +
           " (block average, exact right inverse; substitutes bicubic)";
  }

 private:
  double block() const { return static_cast<double>(fr_ * fc_); }
  void spread(std::span<const double> y, std::span<double> x, double w) const {
    const std::size_t oc = cols_ / fc_;
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) x[r * cols_ + c] = w * y[(r / fr_) * oc + c / fc_];
    }
  }
  std::size_t rows_, cols_, fr_, fc_;
};

/// Unitary 2-D DFT by separable direct sums. sign = -1 forward, +1 inverse.
inline std::vector<Complex> unitary_dft2(const std::vector<Complex>& in, std::size_t rows,
                                         std::size_t cols, int sign) {
  auto twiddles = [sign](std::size_t n) {
    std::vector<Complex> t(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(n);
      t[k] = Complex(std::cos(a), std::sin(a));
    }
    return t;
  };
  const auto tr = twiddles(rows), tc = twiddles(cols);
  std::vector<Complex> tmp(rows * cols), out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t v = 0; v < cols; ++v) {
      Complex s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += in[r * cols + c] * tc[(v * c) % cols];
      tmp[r * cols + v] = s;
    }
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(rows * cols));
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      Complex s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += tmp[r * cols + v] * tr[(u * r) % rows];
      out[u * cols + v] = s * norm;
    }
  }
  return out;
}

inline std::size_t conjugate_frequency(std::size_t f, std::size_t rows, std::size_t cols) {
  const std::size_t u = f / cols, v = f % cols;
  return ((rows - u) % rows) * cols + (cols - v) % cols;
}

// Keeps a set of unitary DFT coefficients, stored as interleaved (re, im).
// Kept frequencies must not be self-conjugate and must not contain a conjugate
// pair, which makes the real measurement map have H H^T = I / 2.
class SubsampledDft final : public OperatorImpl {
 public:
  SubsampledDft(std::size_t rows, std::size_t cols, std::vector<std::size_t> freqs)
      : rows_(rows), cols_(cols), freqs_(std::move(freqs)) {}

  void apply(std::span<const double> x, std::span<double> y) const override {
    std::vector<Complex> img(x.begin(), x.end());
    const auto spec = unitary_dft2(img, rows_, cols_, -1);
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
      y[2 * i] = spec[freqs_[i]].real();
      y[2 * i + 1] = spec[freqs_[i]].imag();
    }
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    back(y, x, 1.0);
  }
  void pinv(std::span<const double> y, std::span<double> x) const override { back(y, x, 2.0); }
  void pinv_adjoint(std::span<const double> x, std::span<double> y) const override {
    apply(x, y);
    for (double& v : y) v *= 2.0;
  }
  std::string describe() const override {
    return "subsampled_dft keep=" + std::to_string(freqs_.size()) + " complex coefficients";
  }

 private:
  void back(std::span<const double> y, std::span<double> x, double w) const {
    std::vector<Complex> spec(rows_ * cols_, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
      spec[freqs_[i]] = Complex(y[2 * i], y[2 * i + 1]);
    }
    const auto img = unitary_dft2(spec, rows_, cols_, +1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = w * img[i].real();
  }
  std::size_t rows_, cols_;
  std::vector<std::size_t> freqs_;
};

class DenseGaussian final : public OperatorImpl {
 public:
  DenseGaussian(Matrix m, Matrix pinv, std::uint64_t seed)
      : m_(std::move(m)), pinv_(std::move(pinv)), seed_(seed) {}

  void apply(std::span<const double> x, std::span<double> y) const override {
    Eigen::Map<Eigen::VectorXd>(y.data(), m_.rows()).noalias() =
        m_ * Eigen::Map<const Eigen::VectorXd>(x.data(), m_.cols());
  }
  void adjoint(std::span<const double> y, std::span<double> x) const override {
    Eigen::Map<Eigen::VectorXd>(x.data(), m_.cols()).noalias() =
        m_.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), m_.rows());
  }
  void pinv(std::span<const double> y, std::span<double> x) const override {
    Eigen::Map<Eigen::VectorXd>(x.data(), pinv_.rows()).noalias() =
        pinv_ * Eigen::Map<const Eigen::VectorXd>(y.data(), pinv_.cols());
  }
  void pinv_adjoint(std::span<const double> x, std::span<double> y) const override {
    Eigen::Map<Eigen::VectorXd>(y.data(), pinv_.cols()).noalias() =
        pinv_.transpose() * Eigen::Map<const Eigen::VectorXd>(x.data(), pinv_.rows());
  }
  std::string describe() const override {
    return "gaussian " + std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()) +
           " seed=" + std::to_string(seed_);
  }
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_, pinv_;
  std::uint64_t seed_;
};

}  // namespace detail

class LinearOperator;
LinearOperator build_operator(const OperatorSpec& spec);

/// Immutable handle to a validated forward operator. Copies share state.
class LinearOperator {
 public:
  OperatorKind kind() const { return impl_->kind; }
  const Shape& domain_shape() const { return impl_->domain; }
  std::size_t domain_size() const { return impl_->domain_size; }
  std::size_t codomain_size() const { return impl_->codomain_size; }
  std::string describe() const { return impl_->describe(); }

  /// H H^+ = I holds to this tolerance (max-norm) for unit-scale inputs.
  double right_inverse_tolerance() const {
    return kind() == OperatorKind::gaussian ? 1e-6 : 1e-8;
  }
  /// Projector identities hold to this tolerance.
  double projector_tolerance() const {
    return kind() == OperatorKind::gaussian ? 1e-6 : 1e-10;
  }

  Tensor apply(const Tensor& x) const {
    require_domain(x, "apply");
    Tensor y(Shape{codomain_size()});
    impl_->apply(x.values(), y.values());
    return y;
  }

  Tensor adjoint_apply(const Tensor& y) const {
    require_codomain(y, "adjoint_apply");
    Tensor x(domain_shape());
    impl_->adjoint(y.values(), x.values());
    return x;
  }

  Tensor pinv_apply(const Tensor& y) const {
    require_codomain(y, "pinv_apply");
    Tensor x(domain_shape());
    impl_->pinv(y.values(), x.values());
    return x;
  }

  Tensor project_range(const Tensor& x) const { return pinv_apply(apply(x)); }
  Tensor project_null(const Tensor& x) const { return x - project_range(x); }

  /// Exposes one action as a tape primitive. `sample_shape` overrides the
  /// per-sample output shape (it must have the same size).
  std::shared_ptr<const LinearMap> map(Action action, Shape sample_shape = {}) const;

  /// Dense matrix of a gaussian operator (empty for structured kinds).
  Matrix dense_matrix() const {
    if (auto* g = dynamic_cast<const detail::DenseGaussian*>(impl_.get())) return g->matrix();
    return {};
  }

  const detail::OperatorImpl& impl() const { return *impl_; }

 private:
  friend LinearOperator build_operator(const OperatorSpec& spec);
  explicit LinearOperator(std::shared_ptr<detail::OperatorImpl> impl) : impl_(std::move(impl)) {}

  void require_domain(const Tensor& x, const char* what) const {
    if (x.shape() != domain_shape()) {
      throw Error(std::string(what) + ": expected signal of shape " +
                  shape_string(domain_shape()) + ", got " + shape_string(x.shape()));
    }
  }
  void require_codomain(const Tensor& y, const char* what) const {
    if (y.size() != codomain_size()) {
      throw Error(std::string(what) + ": expected measurement of dimension " +
                  std::to_string(codomain_size()) + ", got " + std::to_string(y.size()));
    }
  }

  std::shared_ptr<const detail::OperatorImpl> impl_;
};

namespace detail {

class OperatorActionMap final : public LinearMap {
 public:
  OperatorActionMap(std::shared_ptr<const OperatorImpl> op, Action action, Shape out)
      : op_(std::move(op)), action_(action), out_(std::move(out)) {}

  std::size_t input_size() const override {
    return action_ == Action::adjoint || action_ == Action::pinv ? op_->codomain_size
                                                                 : op_->domain_size;
  }
  Shape output_shape() const override { return out_; }

  void forward(std::span<const double> in, std::span<double> out) const override {
    switch (action_) {
      case Action::forward: op_->apply(in, out); break;
      case Action::adjoint: op_->adjoint(in, out); break;
      case Action::pinv: op_->pinv(in, out); break;
      case Action::project_range: range(in, out); break;
      case Action::project_null:
        range(in, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] - out[i];
        break;
    }
  }
  void adjoint(std::span<const double> in, std::span<double> out) const override {
    switch (action_) {
      case Action::forward: op_->adjoint(in, out); break;
      case Action::adjoint: op_->apply(in, out); break;
      case Action::pinv: op_->pinv_adjoint(in, out); break;
      case Action::project_range: range_adjoint(in, out); break;
      case Action::project_null:
        range_adjoint(in, out);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] - out[i];
        break;
    }
  }
  std::string name() const override { return std::string(operator_kind_name(op_->kind)); }

 private:
  void range(std::span<const double> in, std::span<double> out) const {
    std::vector<double> y(op_->codomain_size);
    op_->apply(in, y);
    op_->pinv(y, out);
  }
  void range_adjoint(std::span<const double> in, std::span<double> out) const {
    std::vector<double> y(op_->codomain_size);
    op_->pinv_adjoint(in, y);
    op_->adjoint(y, out);
  }

  std::shared_ptr<const OperatorImpl> op_;
  Action action_;
  Shape out_;
};

inline std::pair<std::size_t, std::size_t> grid_of(const Shape& domain) {
  if (domain.size() == 1) return {1, domain[0]};
  if (domain.size() == 2) return {domain[0], domain[1]};
  throw Error("build_operator: domain must be rank 1 or 2, got " + shape_string(domain));
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = scale * normal(rng);
  }
  return m;
}

}  // namespace detail

inline std::shared_ptr<const LinearMap> LinearOperator::map(Action action,
                                                           Shape sample_shape) const {
  Shape natural = action == Action::forward ? Shape{codomain_size()} : domain_shape();
  if (!sample_shape.empty()) {
    if (shape_size(sample_shape) != shape_size(natural)) {
      throw Error("LinearOperator::map: shape " + shape_string(sample_shape) +
                  " does not fit " + shape_string(natural));
    }
    natural = std::move(sample_shape);
  }
  return std::make_shared<detail::OperatorActionMap>(impl_, action, std::move(natural));
}

inline LinearOperator build_operator(const OperatorSpec& spec) {
  const auto [rows, cols] = detail::grid_of(spec.domain);
  const std::size_t domain = rows * cols;
  if (domain == 0) throw Error("build_operator: empty domain");

  std::shared_ptr<detail::OperatorImpl> impl;
  std::size_t d = 0;
  switch (spec.kind) {
    case OperatorKind::inpainting: {
      if (spec.mask.empty()) throw Error("build_operator: inpainting mask is empty");
      std::set<std::size_t> seen;
      for (std::size_t i : spec.mask) {
        if (i >= domain) {
          throw Error("build_operator: mask index " + std::to_string(i) +
                      " out of range for D=" + std::to_string(domain));
        }
        if (!seen.insert(i).second) {
          throw Error("build_operator: duplicate mask index " + std::to_string(i));
        }
      }
      d = spec.mask.size();
      impl = std::make_shared<detail::Inpainting>(spec.mask);
      break;
    }
    case OperatorKind::block_downsample: {
      const std::size_t f = spec.factor;
      if (f == 0 || cols % f != 0 || (rows > 1 && rows % f != 0)) {
        throw Error("build_operator: factor " + std::to_string(f) +
                    " does not divide domain " + shape_string(spec.domain));
      }
      d = (rows > 1 ? rows / f : 1) * (cols / f);
      impl = std::make_shared<detail::BlockDownsample>(rows, cols, f);
      break;
    }
    case OperatorKind::subsampled_dft: {
      if (spec.frequencies.empty()) throw Error("build_operator: no frequencies kept");
      std::set<std::size_t> seen(spec.frequencies.begin(), spec.frequencies.end());
      if (seen.size() != spec.frequencies.size()) {
        throw Error("build_operator: duplicate frequency index");
      }
      for (std::size_t f : spec.frequencies) {
        if (f >= domain) {
          throw Error("build_operator: frequency index " + std::to_string(f) + " out of range");
        }
        const std::size_t c = detail::conjugate_frequency(f, rows, cols);
        if (c == f) {
          throw Error("build_operator: frequency " + std::to_string(f) +
                      " is self-conjugate (its imaginary part is identically zero)");
        }
        if (seen.count(c)) {
          throw Error("build_operator: frequencies " + std::to_string(f) + " and " +
                      std::to_string(c) + " are a conjugate pair");
        }
      }
      d = 2 * spec.frequencies.size();
      impl = std::make_shared<detail::SubsampledDft>(rows, cols, spec.frequencies);
      break;
    }
    case OperatorKind::gaussian: {
      if (spec.gauss_rows == 0) throw Error("build_operator: gaussian needs d > 0");
      d = spec.gauss_rows;
      if (d > domain) break;
      // Rank-deficient draws are regenerated from the next seed.
      for (std::uint64_t seed = spec.seed; seed < spec.seed + 16; ++seed) {
        Matrix m = detail::gaussian_matrix(d, domain, seed);
        Matrix p;
        try {
          p = svd_pinv_oracle(m);
        } catch (const Error&) {
          continue;
        }
        const double err =
            (m * p - Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)))
                .cwiseAbs()
                .maxCoeff();
        if (err < 1e-6) {
          impl = std::make_shared<detail::DenseGaussian>(std::move(m), std::move(p), seed);
          break;
        }
      }
      if (!impl) throw Error("build_operator: could not draw a full-rank gaussian matrix");
      break;
    }
  }
  if (d > domain) {
    throw Error("build_operator: measurement dimension d=" + std::to_string(d) +
                " exceeds signal dimension D=" + std::to_string(domain));
  }
  impl->kind = spec.kind;
  impl->domain = spec.domain;
  impl->domain_size = domain;
  impl->codomain_size = d;
  return LinearOperator(std::move(impl));
}

/// Largest eigenvalue of H^T H by power iteration from a seeded start.
inline double normal_operator_norm(const LinearOperator& op, int iterations = 20,
                                   std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(op.domain_size()), y(op.codomain_size()), z(op.domain_size());
  for (double& v : x) v = u(rng);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const double n = norm2(x);
    if (n == 0.0) return 0.0;
    for (double& v : x) v /= n;
    op.impl().apply(x, y);
    op.impl().adjoint(y, z);
    lambda = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lambda += x[i] * z[i];
    x.swap(z);
  }
  return lambda;
}

/// Solves (H^T H + lambda I) z = H^T y by conjugate gradients.
inline Tensor regularized_pinv(const LinearOperator& op, const Tensor& y, double lambda,
                               double tol = 1e-10, int max_iter = 1000) {
  if (!(lambda > 0.0)) throw Error("regularized_pinv: lambda must be positive");
  if (y.size() != op.codomain_size()) {
    throw Error("regularized_pinv: expected measurement of dimension " +
                std::to_string(op.codomain_size()) + ", got " + std::to_string(y.size()));
  }
  const std::size_t n = op.domain_size();
  std::vector<double> tmp(op.codomain_size());
  auto normal = [&](const std::vector<double>& v, std::vector<double>& out) {
    op.impl().apply(v, tmp);
    op.impl().adjoint(tmp, out);
    for (std::size_t i = 0; i < n; ++i) out[i] += lambda * v[i];
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };

  std::vector<double> z(n, 0.0), r(n), p, ap(n);
  op.impl().adjoint(y.values(), r);
  p = r;
  double rr = dot(r, r);
  for (int it = 0; it <= max_iter; ++it) {
    if (std::sqrt(rr) <= tol) return Tensor(op.domain_shape(), std::move(z));
    if (it == max_iter) break;
    normal(p, ap);
    const double alpha = rr / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  throw Error("regularized_pinv: no convergence in " + std::to_string(max_iter) +
              " iterations, residual " + std::to_string(std::sqrt(rr)));
}

}  // namespace rndecomp
