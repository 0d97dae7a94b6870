#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace gspn {

template <typename Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

// log(sum(exp(x))) with the running maximum subtracted. -inf operands carry no
// mass; an all -inf input yields -inf.
template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() == 0) return neg_inf<Scalar>();
  const Scalar top = x.maxCoeff();
  if (top == neg_inf<Scalar>()) return top;
  if (!std::isfinite(top)) return top;
  return top + std::log((x.derived().array() - top).exp().sum());
}

// log(mean(exp(x))).
template <typename Derived>
typename Derived::Scalar logmeanexp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return logsumexp(x) - std::log(static_cast<Scalar>(x.size()));
}

// Row-wise log-softmax of an unconstrained parameter matrix.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar norm = logsumexp(logits.row(r));
    out.row(r) = logits.row(r).array() - norm;
  }
  return out;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  return log_softmax_rows(logits).array().exp().matrix();
}

// a + b in log space.
template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  if (a == neg_inf<Scalar>()) return b;
  if (b == neg_inf<Scalar>()) return a;
  const Scalar hi = a > b ? a : b;
  const Scalar lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace gspn
