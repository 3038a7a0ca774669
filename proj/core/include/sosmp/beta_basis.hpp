#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <optional>

namespace sosmp {

/// Hard bounds on the Beta shape parameters. Shapes at or above 1 keep every
/// kernel exponent non-negative, so products of up to four kernels stay
/// integrable; 0.8 is the lowest admissible value (worst four-way exponent sum
/// 4*(0.8-1) = -0.8 > -1).
constexpr double kAlphaFloor = 0.8;
constexpr double kAlphaDefaultMin = 1.0;
constexpr double kAlphaDefaultMax = 400.0;

/// A product kernel prod_m x_m^{a_m} (1-x_m)^{b_m}. Closed under addition of
/// exponents, which is what multiplying kernels does.
struct ExponentVector {
  Eigen::VectorXd a;  // x exponents
  Eigen::VectorXd b;  // (1-x) exponents

  ExponentVector operator+(const ExponentVector& o) const { return {a + o.a, b + o.b}; }
};

/// n trainable d-variate Beta kernels b_i(x) = prod_m x_m^{alpha_im - 1} (1-x_m)^{beta_im - 1},
/// defined on the open unit box. Immutable after construction.
class BetaBasis {
 public:
  BetaBasis(Eigen::MatrixXd alpha, Eigen::MatrixXd beta,
            std::optional<int> frozen_constant = std::nullopt);

  /// Basis of n copies of the constant function 1.
  static BetaBasis constant(int n, int d);

  int size() const { return static_cast<int>(alpha_.rows()); }
  int dim() const { return static_cast<int>(alpha_.cols()); }
  const Eigen::MatrixXd& alpha() const { return alpha_; }
  const Eigen::MatrixXd& beta() const { return beta_; }
  std::optional<int> frozen_constant() const { return frozen_constant_; }

  /// Kernel values [b_1(x), ..., b_n(x)]; x must be strictly interior.
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

  /// Log kernel values; the accumulation all evaluations share.
  Eigen::VectorXd eval_log(const Eigen::VectorXd& x) const;

  ExponentVector row_exponents(int i) const;
  /// Exponents of the product kernel b_i * b_j.
  ExponentVector pair_exponents(int i, int j) const;

  bool same_shape_as(const BetaBasis& o) const;

  nlohmann::json to_json() const;
  static BetaBasis from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd alpha_;  // n x d
  Eigen::MatrixXd beta_;   // n x d
  std::optional<int> frozen_constant_;
};

/// Throws std::domain_error unless every coordinate is strictly inside (0, 1).
void require_interior(const Eigen::VectorXd& x);

}  // namespace sosmp
