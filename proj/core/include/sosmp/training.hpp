#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "sosmp/belief.hpp"
#include "sosmp/rf_cde.hpp"

namespace sosmp {

enum class OptimizerKind { kSgd, kAdam };
enum class GradMode { kAnalyticAdjoint, kFiniteDifference };

struct TrainConfig {
  int n_basis = 10;
  double learning_rate = 1e-2;
  int batch_size = 256;
  int epochs = 40;
  double w_barrier = 1e-3;
  double w_pen = 1.0;
  double epsilon = 1e-6;       // PD margin in the eigenvalue penalty
  double c_reg = 1e-4;
  double alpha_min = kAlphaDefaultMin;
  double alpha_max = kAlphaDefaultMax;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  GradMode grad_mode = GradMode::kAnalyticAdjoint;
  double val_fraction = 0.2;
  EigenvaluePick pick = EigenvaluePick::kLargestPositive;
  // Relative eigenvalue gap below which the analytic adjoint is unreliable and
  // the step falls back to finite differences.
  double fd_gap_threshold = 1e-6;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double residual = 0.0;
  double r_min_eig = 0.0;
  double feasible_fraction = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int fd_fallbacks = 0;
  int infeasible_steps = 0;
  int skipped_samples = 0;
  int best_epoch = -1;

  std::string to_csv() const;
};

/// Trainable parameters of the conditional model. phi_frozen marks the phi row
/// pinned to the constant function; its shape coordinates carry zero gradient.
struct CdeParams {
  Eigen::MatrixXd L;
  Eigen::MatrixXd phi_alpha, phi_beta;
  Eigen::MatrixXd psi_alpha, psi_beta;
  std::optional<int> phi_frozen = 0;

  int n() const { return static_cast<int>(L.rows()); }
  int d() const { return static_cast<int>(phi_alpha.cols()); }
  int packed_size() const { return n() * n() + 4 * n() * d(); }

  BetaBasis phi() const { return BetaBasis(phi_alpha, phi_beta, phi_frozen); }
  BetaBasis psi() const { return BetaBasis(psi_alpha, psi_beta); }

  Eigen::VectorXd pack() const;
  static CdeParams unpack(const Eigen::VectorXd& v, int n, int d, std::optional<int> phi_frozen);

  /// Clamp all shape parameters into [alpha_min, alpha_max]; the frozen row is
  /// re-pinned to exactly 1.
  void clamp_shapes(double alpha_min, double alpha_max);
};

struct CdeLoss {
  double value = 0.0;
  bool feasible = false;
  double nll = 0.0;       // mean negative log-likelihood (feasible branch only)
  double barrier = 0.0;   // -w_barrier log det R
  double penalty = 0.0;   // w_pen * eigenvalue hinge (infeasible branch)
  double reg = 0.0;
  int skipped = 0;        // samples whose density underflowed to zero
  NormalizationSolution norm;
};

/// Loss of the conditional model on a batch of transition pairs (rows of xs
/// pair with rows of xps). Rebuilds the cross-moment tensor and re-solves the
/// normalization at the current parameters.
CdeLoss cde_loss(const CdeParams& params, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xps,
                 const TrainConfig& cfg);

struct CdeGradient {
  CdeLoss loss;
  Eigen::VectorXd grad;   // same layout as CdeParams::pack
  bool used_fd = false;   // analytic mode fell back to finite differences
};

CdeGradient cde_loss_grad(const CdeParams& params, const Eigen::MatrixXd& xs,
                          const Eigen::MatrixXd& xps, const TrainConfig& cfg, GradMode mode);

/// Two-stage step 1: fit the conditional model by mini-batch descent. Returns
/// the best-validation feasible model; throws std::runtime_error with the
/// infeasibility history if no feasible iterate was ever found.
std::pair<RationalFactorCDE, TrainReport> train_cde(const Eigen::MatrixXd& transitions,
                                                    const TrainConfig& cfg);

/// Trainable parameters of the initial belief h0 = ||L0 chi(x)||^2.
struct InitialParams {
  Eigen::MatrixXd L0;
  Eigen::MatrixXd chi_alpha, chi_beta;
  std::optional<int> chi_frozen;

  int n() const { return static_cast<int>(L0.rows()); }
  int d() const { return static_cast<int>(chi_alpha.cols()); }
  BetaBasis chi() const { return BetaBasis(chi_alpha, chi_beta, chi_frozen); }
  Eigen::VectorXd pack() const;
  static InitialParams unpack(const Eigen::VectorXd& v, int n, int d, std::optional<int> frozen);
};

struct InitialLoss {
  double value = 0.0;
  double nll = 0.0;     // -mean log(g h0) + log Z
  double log_z = 0.0;
  double reg = 0.0;
  int skipped = 0;
};

InitialLoss initial_loss(const InitialParams& params, const RationalFactorCDE& model,
                         const Eigen::MatrixXd& x0s, const TrainConfig& cfg);

struct InitialGradient {
  InitialLoss loss;
  Eigen::VectorXd grad;
};

InitialGradient initial_loss_grad(const InitialParams& params, const RationalFactorCDE& model,
                                  const Eigen::MatrixXd& x0s, const TrainConfig& cfg,
                                  GradMode mode);

/// Two-stage step 2: fit h0 against the frozen g of a trained model. The exact
/// analytic normalization constant makes the result a valid density at every
/// iterate. Returns the normalized step-0 belief.
Belief train_initial(const Eigen::MatrixXd& x0s, const RationalFactorCDE& model,
                     const TrainConfig& cfg, TrainReport* report = nullptr,
                     std::optional<int> chi_frozen = std::nullopt);

/// Adaptive-moment optimizer.
class AdamOptimizer {
 public:
  AdamOptimizer(int size, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace sosmp
