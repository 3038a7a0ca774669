#pragma once

#include <nlohmann/json_fwd.hpp>
#include <utility>
#include <vector>

#include "sosmp/rf_cde.hpp"

namespace sosmp {

/// Belief p(x_k) = g(x_k) h_k(x_k) exp(-log_Z). The factor g is shared with
/// the model (coefficients R over the phi products); h_k lives over its own
/// basis: chi at step 0, the model's psi afterwards. H is kept PSD so the
/// density evaluates as a product of two sums of squares, non-negative in
/// floating point, which is exactly what the construction guarantees on paper.
class Belief {
 public:
  /// h(x) = ||h_factor chi(x)||^2, i.e. H = h_factor^T h_factor.
  Belief(Eigen::MatrixXd g_coeff, BetaBasis g_basis, BetaBasis h_basis,
         Eigen::MatrixXd h_factor, int step, double log_z);

  const Eigen::MatrixXd& g_coeff() const { return g_coeff_; }
  const BetaBasis& g_basis() const { return g_basis_; }
  const BetaBasis& h_basis() const { return h_basis_; }
  const Eigen::MatrixXd& h() const { return h_coeff_; }
  const Eigen::MatrixXd& h_factor() const { return h_factor_; }
  int step() const { return step_; }
  double log_z() const { return log_z_; }

  double eval(const Eigen::VectorXd& x) const;
  double log_eval(const Eigen::VectorXd& x) const;

  Belief with_log_z(double log_z) const;

  nlohmann::json to_json() const;
  /// Loads {step, h_basis, H, log_Z}; g comes from the model.
  static Belief from_json(const nlohmann::json& j, const RationalFactorCDE& model);

  /// PSD projection: eigen-decomposes the symmetrized coefficient matrix and
  /// drops (rounding-level) negative eigenvalues, returning a square root
  /// factor F with F^T F ~= H.
  static Eigen::MatrixXd psd_factor_of(const Eigen::MatrixXd& h);

 private:
  Eigen::MatrixXd g_coeff_;
  Eigen::MatrixXd g_chol_;  // lower Cholesky of g_coeff
  BetaBasis g_basis_;
  BetaBasis h_basis_;
  Eigen::MatrixXd h_coeff_;
  Eigen::MatrixXd h_factor_;
  int step_;
  double log_z_;
};

struct PropagationResult {
  Belief belief;
  double raw_mass;     // analytic mass before any renormalization
  bool renormalized;   // true when the drift policy kicked in
};

/// Drives the analytic recursion p(x_{k+1}) = g * (Q o <phi phi, h>) with the
/// model's cross-moment tensors. Tensors are cached per h-basis and rebuilt
/// whenever the basis changes.
class PropagationEngine {
 public:
  explicit PropagationEngine(RationalFactorCDE model);

  const RationalFactorCDE& model() const { return model_; }

  /// Normalized step-0 belief from an initial-belief factor h0 = ||L0 chi||^2.
  Belief initial_belief(const BetaBasis& chi, const Eigen::MatrixXd& l0) const;

  /// Exact analytic mass of the belief density.
  double integrate_belief(const Belief& b) const;

  /// Rescales h so the analytic mass is exactly 1 (log_Z folded in).
  Belief normalized(const Belief& b) const;

  /// One step of the recursion. Mass is preserved by the normalization
  /// constraint; if accumulated floating-point drift exceeds 1e-6 the result
  /// is renormalized and flagged.
  PropagationResult propagate(const Belief& b) const;

  /// Exact pairwise marginal on an m x m grid of cell centers over dims
  /// (dim_a, dim_b); all other dimensions are integrated out in closed form.
  Eigen::MatrixXd marginal_grid(const Belief& b, int dim_a, int dim_b, int m) const;
  /// Same, at caller-provided coordinates.
  Eigen::MatrixXd marginal_grid(const Belief& b, int dim_a, int dim_b,
                                const Eigen::VectorXd& grid_a,
                                const Eigen::VectorXd& grid_b) const;

  /// Per-dimension mean and variance via closed-form shifted Beta integrals.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> moments(const Belief& b) const;

 private:
  const CrossMomentTensor& tensor_for(const BetaBasis& h_basis) const;

  RationalFactorCDE model_;
  mutable std::vector<std::pair<BetaBasis, CrossMomentTensor>> tensor_cache_;
};

constexpr double kMassDriftTol = 1e-6;

}  // namespace sosmp
