#pragma once

// Dense primitives shared by the estimators: leading singular triple and
// eigenpair by power iteration, least squares, and orthogonal-complement
// projection. Everything is templated on the scalar type of the Eigen input.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "supercent/errors.hpp"

namespace supercent {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Reciprocal condition estimate of the Gram matrix below which a design is
// treated as singular.
inline constexpr double kSingularRcond = 1e-12;

template <typename Scalar>
struct SingularTriple {
  Scalar d{0};
  Vec<Scalar> u;
  Vec<Scalar> v;
  int iterations{0};
};

template <typename Scalar>
struct Eigenpair {
  Scalar value{0};
  Vec<Scalar> vector;
  int iterations{0};
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

namespace detail {

// Normalized all-ones start; if the matrix annihilates it, nudge the first
// coordinate by 1e-6, and as a last resort start from the heaviest column.
template <typename Derived>
Vec<typename Derived::Scalar> power_start(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = a.cols();
  const Scalar scale = a.norm();
  Vec<Scalar> x = Vec<Scalar>::Ones(n) / std::sqrt(static_cast<Scalar>(n));
  const Scalar floor = scale * std::numeric_limits<Scalar>::epsilon() * Scalar(16);
  if ((a * x).norm() > floor) return x;
  x(0) += Scalar(1e-6);
  x.normalize();
  if ((a * x).norm() > floor) return x;
  Eigen::Index heaviest = 0;
  a.colwise().squaredNorm().maxCoeff(&heaviest);
  x.setZero();
  x(heaviest) = Scalar(1);
  return x;
}

template <typename T>
Eigen::VectorXd to_double(const T& x) {
  return x.template cast<double>();
}

}  // namespace detail

/// Leading singular triple (d, u, v) of `a` by alternating power iteration.
///
/// Stops once ‖A v − d u‖₂ ≤ tol·‖A‖_F, measured before the final left
/// update so that the returned triple satisfies A v = d u exactly and
/// Aᵀu − d v carries the residual. The start vector is fixed (see
/// detail::power_start), so results are deterministic.
template <typename Derived>
SingularTriple<typename Derived::Scalar> leading_singular_triple(
    const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tol = 1e-12,
    int max_iter = 10000) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() < 1 || a.cols() < 1) throw InputError("leading_singular_triple: empty matrix");
  if (!(tol > 0)) throw InputError("leading_singular_triple: tol must be positive");
  if (!all_finite(a)) throw InputError("leading_singular_triple: non-finite entries");

  const Scalar scale = a.norm();
  SingularTriple<Scalar> out;
  out.v = detail::power_start(a);
  if (scale == Scalar(0)) {
    out.u = Vec<Scalar>::Ones(a.rows()) / std::sqrt(static_cast<Scalar>(a.rows()));
    return out;
  }

  Vec<Scalar> z = a * out.v;
  out.u = z / z.norm();
  for (int it = 1; it <= max_iter; ++it) {
    Vec<Scalar> w = a.transpose() * out.u;
    const Scalar sigma = w.norm();
    out.v = w / sigma;
    z.noalias() = a * out.v;
    const Scalar residual = (z - sigma * out.u).norm();
    out.d = z.norm();
    out.u = z / out.d;
    out.iterations = it;
    if (residual <= tol * scale) return out;
  }
  throw NonConvergenceError("leading_singular_triple: no convergence in " +
                                std::to_string(max_iter) + " iterations",
                            static_cast<double>(out.d), detail::to_double(out.u),
                            detail::to_double(out.v), max_iter);
}

/// Eigenpair of largest |eigenvalue| for a symmetric matrix.
template <typename Derived>
Eigenpair<typename Derived::Scalar> leading_eigenpair(const Eigen::MatrixBase<Derived>& a,
                                                      typename Derived::Scalar tol = 1e-12,
                                                      int max_iter = 10000) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols() || a.rows() < 1)
    throw InputError("leading_eigenpair: matrix must be square");
  if (!(tol > 0)) throw InputError("leading_eigenpair: tol must be positive");
  if (!all_finite(a)) throw InputError("leading_eigenpair: non-finite entries");
  const Scalar asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > Scalar(1e-10) * std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff()))
    throw InputError("leading_eigenpair: matrix is not symmetric");

  const Scalar scale = a.norm();
  Eigenpair<Scalar> out;
  out.vector = detail::power_start(a);
  if (scale == Scalar(0)) return out;

  for (int it = 1; it <= max_iter; ++it) {
    Vec<Scalar> z = a * out.vector;
    out.value = out.vector.dot(z);
    const Scalar residual = (z - out.value * out.vector).norm();
    out.iterations = it;
    if (residual <= tol * scale) return out;
    out.vector = z / z.norm();
  }
  throw NonConvergenceError("leading_eigenpair: no convergence in " + std::to_string(max_iter) +
                                " iterations",
                            static_cast<double>(out.value), detail::to_double(out.vector),
                            detail::to_double(out.vector), max_iter);
}

template <typename Derived>
void require_full_column_rank(const Eigen::MatrixBase<Derived>& w, const char* who) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> gram = w.transpose() * w;
  Eigen::LLT<Mat<Scalar>> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() >= Scalar(kSingularRcond)))
    throw SingularDesignError(std::string(who) + ": design matrix is numerically singular");
}

/// Least-squares coefficients minimizing ‖y − Wβ‖₂². Requires more rows than
/// columns and a well-conditioned Gram matrix.
template <typename DerivedW, typename DerivedY>
Vec<typename DerivedW::Scalar> ols_fit(const Eigen::MatrixBase<DerivedW>& w,
                                       const Eigen::MatrixBase<DerivedY>& y) {
  if (w.rows() != y.size()) throw InputError("ols_fit: row count of W and length of y differ");
  if (w.rows() <= w.cols()) throw InputError("ols_fit: need more rows than columns");
  require_full_column_rank(w, "ols_fit");
  return w.colPivHouseholderQr().solve(y);
}

/// (I − P_X) z.
template <typename DerivedX, typename DerivedZ>
Vec<typename DerivedX::Scalar> project_complement(const Eigen::MatrixBase<DerivedX>& x,
                                                  const Eigen::MatrixBase<DerivedZ>& z) {
  if (x.rows() != z.size())
    throw InputError("project_complement: row count of X and length of z differ");
  if (x.rows() < x.cols()) throw SingularDesignError("project_complement: X is rank deficient");
  require_full_column_rank(x, "project_complement");
  const auto qr = x.colPivHouseholderQr();
  return z - x * qr.solve(z);
}

/// sin of the angle between span(a) and span(b), i.e. ‖P_a − P_b‖₂. Computed
/// from the orthogonal residual so small angles keep full precision.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar projection_distance(const Eigen::MatrixBase<DerivedA>& a,
                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw DegenerateError("projection_distance: zero vector");
  const Vec<Scalar> ua = a / na;
  const Vec<Scalar> ub = b / nb;
  const Scalar s = (ua - ua.dot(ub) * ub).norm();
  return std::min(s, Scalar(1));
}

}  // namespace supercent
