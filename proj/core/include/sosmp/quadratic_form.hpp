#pragma once

#include <nlohmann/json_fwd.hpp>

#include "sosmp/algebra.hpp"
#include "sosmp/beta_basis.hpp"

namespace sosmp {

/// Unconstrained square-root parameterization of a PSD matrix: Q = L^T L.
struct PsdFactor {
  Eigen::MatrixXd L;

  Eigen::MatrixXd gram() const { return L.transpose() * L; }
  int size() const { return static_cast<int>(L.rows()); }
};

/// b(x)^T C b(x) over a Beta basis. The coefficient matrix is symmetrized on
/// construction; the double-sum expansion assumes it.
class QuadraticForm {
 public:
  QuadraticForm(BetaBasis basis, const Eigen::MatrixXd& coeff);

  const BetaBasis& basis() const { return basis_; }
  const Eigen::MatrixXd& coeff() const { return coeff_; }

  double eval(const Eigen::VectorXd& x) const;

  /// Exact unit-box integral: sum_ij c_ij <b_i, b_j>.
  double integrate() const;

  nlohmann::json to_json(const std::string& basis_id) const;
  static Eigen::MatrixXd coeff_from_json(const nlohmann::json& j, int n);

 private:
  BetaBasis basis_;
  Eigen::MatrixXd coeff_;
};

/// Integrates the dependent variable out of the separable joint SoS form with
/// factor q over bases (phi, psi): the result is the quadratic form over phi
/// with coefficients Gamma_psi o Q, itself PSD by the Schur product theorem.
QuadraticForm integrate_out_dependent(const PsdFactor& q, const BetaBasis& phi,
                                      const BetaBasis& psi);

}  // namespace sosmp
