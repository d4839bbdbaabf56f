#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "rndecomp/tensor.hpp"

namespace rndecomp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SingularValues {
  Matrix u;                 // n x r, orthonormal columns
  Eigen::VectorXd sigma;    // r
  Matrix v;                 // r x r
};

namespace detail {

// One-sided Jacobi on the columns of a (n x r, n >= r): a * v = u * diag(sigma).
inline SingularValues one_sided_jacobi(Matrix a, int max_sweeps = 60) {
  const Eigen::Index r = a.cols();
  Matrix v = Matrix::Identity(r, r);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < r; ++p) {
      for (Eigen::Index q = p + 1; q < r; ++q) {
        const double alpha = a.col(p).squaredNorm();
        const double beta = a.col(q).squaredNorm();
        const double gamma = a.col(p).dot(a.col(q));
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          const double ap = a(i, p), aq = a(i, q);
          a(i, p) = c * ap - s * aq;
          a(i, q) = s * ap + c * aq;
        }
        for (Eigen::Index i = 0; i < r; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  SingularValues out{Matrix(a.rows(), r), Eigen::VectorXd(r), std::move(v)};
  for (Eigen::Index j = 0; j < r; ++j) {
    const double s = a.col(j).norm();
    out.sigma(j) = s;
    out.u.col(j) = s > 0.0 ? Eigen::VectorXd(a.col(j) / s) : Eigen::VectorXd::Zero(a.rows());
  }
  return out;
}

}  // namespace detail

/// Moore-Penrose pseudo-inverse of a full-rank matrix via one-sided Jacobi
/// SVD. Throws when the smallest singular value is below 1e-10.
inline Matrix svd_pinv_oracle(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw Error("svd_pinv: empty matrix");
  const bool wide = m.rows() <= m.cols();
  // Work on the tall orientation: a = m^T when m is wide.
  const Matrix a = wide ? Matrix(m.transpose()) : m;
  const SingularValues svd = detail::one_sided_jacobi(a);
  const double smallest = svd.sigma.minCoeff();
  if (!(smallest > 1e-10)) {
    throw Error("svd_pinv: matrix is rank deficient (smallest singular value " +
                std::to_string(smallest) + ")");
  }
  // a = u diag(s) v^T  =>  a^+ = v diag(1/s) u^T, and m^+ = (a^+)^T when m = a^T.
  const Matrix a_pinv = svd.v * svd.sigma.cwiseInverse().asDiagonal() * svd.u.transpose();
  return wide ? Matrix(a_pinv.transpose()) : a_pinv;
}

}  // namespace rndecomp
