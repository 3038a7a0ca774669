#include "sosmp/algebra.hpp"

#include <cmath>
#include <stdexcept>

#include "sosmp/special_functions.hpp"

namespace sosmp {

double log_kernel_integral(const ExponentVector& e) {
  if (e.a.size() != e.b.size()) {
    throw std::invalid_argument("kernel_integral: exponent vectors differ in length");
  }
  double acc = 0.0;
  for (Eigen::Index m = 0; m < e.a.size(); ++m) {
    if (!(e.a[m] > -1.0) || !(e.b[m] > -1.0)) {
      throw std::domain_error("kernel_integral: divergent (exponent <= -1)");
    }
    acc += log_beta(e.a[m] + 1.0, e.b[m] + 1.0);
  }
  return acc;
}

double kernel_integral(const ExponentVector& e) {
  return std::exp(log_kernel_integral(e));
}

Eigen::MatrixXd gram_matrix(const BetaBasis& basis) {
  const int n = basis.size();
  Eigen::MatrixXd gamma(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = kernel_integral(basis.pair_exponents(i, j));
      gamma(i, j) = v;
      gamma(j, i) = v;
    }
  }
  return gamma;
}

CrossMomentTensor::CrossMomentTensor(Eigen::MatrixXd entries, int n, std::string left_id,
                                     std::string right_id)
    : entries_(std::move(entries)), n_(n), left_id_(std::move(left_id)),
      right_id_(std::move(right_id)) {
  if (entries_.rows() != n_ * n_ || entries_.cols() != n_ * n_) {
    throw std::invalid_argument("CrossMomentTensor: entries must be n^2 x n^2");
  }
}

CrossMomentTensor CrossMomentTensor::transposed() const {
  return CrossMomentTensor(entries_.transpose(), n_, right_id_, left_id_);
}

CrossMomentTensor cross_moment_tensor(const BetaBasis& left, const BetaBasis& right,
                                      const std::string& left_id, const std::string& right_id) {
  if (left.dim() != right.dim()) {
    throw std::invalid_argument("cross_moment_tensor: dimension mismatch");
  }
  if (left.size() != right.size()) {
    throw std::invalid_argument("cross_moment_tensor: basis sizes must match");
  }
  const int n = left.size();
  const int d = left.dim();
  // Pair exponent sums, cached once per (i, j).
  std::vector<ExponentVector> lp(n * n), rp(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      lp[i * n + j] = left.pair_exponents(i, j);
      rp[i * n + j] = right.pair_exponents(i, j);
    }
  }
  Eigen::MatrixXd entries(n * n, n * n);
  ExponentVector sum{Eigen::VectorXd(d), Eigen::VectorXd(d)};
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const ExponentVector& l = lp[i * n + j];
      for (int k = 0; k < n; ++k) {
        for (int m = k; m < n; ++m) {
          const ExponentVector& r = rp[k * n + m];
          sum.a = l.a + r.a;
          sum.b = l.b + r.b;
          const double v = kernel_integral(sum);
          entries(i * n + j, k * n + m) = v;
          entries(i * n + j, m * n + k) = v;
          entries(j * n + i, k * n + m) = v;
          entries(j * n + i, m * n + k) = v;
        }
      }
    }
  }
  return CrossMomentTensor(std::move(entries), n, left_id, right_id);
}

}  // namespace sosmp
