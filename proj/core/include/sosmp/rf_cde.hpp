#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <nlohmann/json_fwd.hpp>

#include "sosmp/algebra.hpp"
#include "sosmp/beta_basis.hpp"
#include "sosmp/linalg.hpp"
#include "sosmp/quadratic_form.hpp"

namespace sosmp {

/// Which positive real eigenvalue of diag(vQ) E the normalization solve keeps.
/// The largest is the numerically safest default; kBestPdMargin scans all
/// candidates and keeps the one whose R has the greatest minimum eigenvalue.
enum class EigenvaluePick { kLargestPositive, kBestPdMargin };

/// Outcome of the normalization fixed-point solve. The coefficient matrix R of
/// the shared factor g is the eigenvector of diag(vQ) E at eigenvalue 1 after
/// rescaling Q; it is reshaped, symmetrized, sign-fixed to positive trace and
/// scaled to Frobenius norm n. R is derived state, never trained directly.
struct NormalizationSolution {
  double scale_lambda = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd R;
  Eigen::VectorXd vR;
  double residual = std::numeric_limits<double>::infinity();
  double r_min_eig = -std::numeric_limits<double>::infinity();
  bool feasible = false;

  // Diagnostics.
  bool has_positive_real = false;
  int n_positive_real = 0;
  int n_pd_candidates = 0;    // eigenvector multiplicity: candidates with PD R
  double asymmetry = 0.0;     // relative asymmetry of the raw reshaped eigenvector
  double eigen_gap = std::numeric_limits<double>::infinity();

  // State the training adjoint needs to differentiate through the solve.
  std::shared_ptr<const GeneralEigen> eigen;
  int picked = -1;
  double sign = 1.0;
};

/// Cross-moment tensor driving the normalization fixed point
/// vR = diag(vQ) E vR: row pairs range over the x'-basis (psi), column pairs
/// over the shared basis (phi).
CrossMomentTensor normalization_tensor(const BetaBasis& phi, const BetaBasis& psi);

/// Solves the normalization constraint for a given factor: rescales Q = L^T L
/// by the chosen positive real eigenvalue so the fixed point has eigenvalue
/// exactly 1, and extracts R from the corresponding eigenvector. When no
/// positive real eigenvalue exists the result is infeasible (training applies
/// the penalty branch); solver failures surface the same way, never as a throw.
NormalizationSolution solve_normalization(const PsdFactor& L, const CrossMomentTensor& e_norm,
                                          EigenvaluePick pick = EigenvaluePick::kLargestPositive);

/// Rational-factor conditional density p(x'|x) = g(x') f(x,x') / g(x), where
/// f is a SoS form over the separable product basis phi(x) o psi(x') and
/// g = phi^T R phi with R from the normalization solve. Feasible models
/// integrate to exactly 1 over x' for every conditioner.
class RationalFactorCDE {
 public:
  RationalFactorCDE(BetaBasis phi, BetaBasis psi, Eigen::MatrixXd L,
                    EigenvaluePick pick = EigenvaluePick::kLargestPositive);

  const BetaBasis& phi() const { return phi_; }
  const BetaBasis& psi() const { return psi_; }
  const Eigen::MatrixXd& factor() const { return L_; }
  double scale_lambda() const { return norm_.scale_lambda; }
  const Eigen::MatrixXd& r() const { return norm_.R; }
  /// Rescaled coefficient matrix Q = L^T L / scale_lambda.
  Eigen::MatrixXd q() const;
  const NormalizationSolution& normalization() const { return norm_; }
  bool feasible() const { return norm_.feasible; }

  int n() const { return phi_.size(); }
  int d() const { return phi_.dim(); }

  double g(const Eigen::VectorXd& u) const;
  double log_g(const Eigen::VectorXd& u) const;

  /// Density value; requires a feasible model and interior points.
  double eval_conditional(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next) const;
  /// Log density, accumulated in log space; -inf when the density underflows
  /// to zero (callers exclude such samples and count them).
  double log_conditional(const Eigen::VectorXd& x, const Eigen::VectorXd& x_next) const;

  /// Trainable parameter count: factor + R + both bases' shape parameters.
  int count_parameters() const;

  const CrossMomentTensor& norm_tensor() const { return e_norm_; }

  nlohmann::json to_json() const;
  /// Rebuilds the model and verifies the normalization residual and that R is
  /// PD; refuses files that fail either check.
  static RationalFactorCDE from_json(const nlohmann::json& j);

 private:
  void require_feasible() const;

  BetaBasis phi_;
  BetaBasis psi_;
  Eigen::MatrixXd L_;
  CrossMomentTensor e_norm_;
  NormalizationSolution norm_;
  Eigen::MatrixXd r_chol_;  // lower Cholesky of R when feasible
};

/// Parameter count of an initial-belief model (factor plus its basis shapes).
int count_initial_parameters(int n, int d);

}  // namespace sosmp
