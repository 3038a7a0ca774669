#pragma once

#include <string>

#include "sosmp/beta_basis.hpp"

namespace sosmp {

/// Exact unit-box integral of the kernel prod_m x^{a_m} (1-x)^{b_m}:
/// prod_m B(a_m + 1, b_m + 1), accumulated in log space.
/// Throws if any exponent is <= -1 (divergent integral).
double kernel_integral(const ExponentVector& e);

/// Log of kernel_integral; never under/overflows for admissible exponents.
double log_kernel_integral(const ExponentVector& e);

/// Gram matrix of the basis: Gamma_ij = <b_i, b_j>. Symmetric PSD.
Eigen::MatrixXd gram_matrix(const BetaBasis& basis);

/// Cross moments of two bases over the unit box. The entry with row pair
/// (i, j) and column pair (k, l) is <left_i left_j, right_k right_l>; row and
/// column pairs are flattened row-major, (i, j) -> i*n + j.
class CrossMomentTensor {
 public:
  CrossMomentTensor(Eigen::MatrixXd entries, int n, std::string left_id, std::string right_id);

  int n() const { return n_; }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double at(int i, int j, int k, int l) const { return entries_(i * n_ + j, k * n_ + l); }
  const std::string& left_basis_id() const { return left_id_; }
  const std::string& right_basis_id() const { return right_id_; }

  /// Same entries viewed with the basis roles exchanged.
  CrossMomentTensor transposed() const;

 private:
  Eigen::MatrixXd entries_;  // n^2 x n^2
  int n_;
  std::string left_id_;
  std::string right_id_;
};

CrossMomentTensor cross_moment_tensor(const BetaBasis& left, const BetaBasis& right,
                                      const std::string& left_id = "left",
                                      const std::string& right_id = "right");

}  // namespace sosmp
