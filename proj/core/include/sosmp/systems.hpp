#pragma once

#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "sosmp/belief.hpp"

namespace sosmp {

/// Per-dimension Gaussian-CDF map from the original state space into the open
/// unit box, clamped to [clamp_eps, 1-clamp_eps]. Strictly monotone and
/// invertible off the clamp region.
struct BoxTransform {
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  double clamp_eps = 1e-6;

  int dim() const { return static_cast<int>(mu.size()); }
  Eigen::VectorXd to_box(const Eigen::VectorXd& x) const;
  /// Same, reporting whether any coordinate was clamped.
  Eigen::VectorXd to_box(const Eigen::VectorXd& x, bool* clamped) const;
  Eigen::VectorXd to_original(const Eigen::VectorXd& u) const;

  nlohmann::json to_json() const;
  static BoxTransform from_json(const nlohmann::json& j);
};

/// mu = sample mean, sigma = sigma_inflation * sample std per dimension.
/// Inflation keeps propagated mass away from the box boundary.
BoxTransform fit_transform(const Eigen::MatrixXd& samples, double sigma_inflation = 3.0);

/// Converts a density value in box space into original units by multiplying
/// with the Jacobian determinant of the forward map at x.
double density_change_of_variables(double box_density, const Eigen::VectorXd& x_original,
                                   const BoxTransform& t);

enum class DatasetKind { kInitial, kTransition };
enum class DataSpace { kOriginal, kBox };

struct Dataset {
  DatasetKind kind = DatasetKind::kInitial;
  DataSpace space = DataSpace::kBox;
  Eigen::MatrixXd points;  // N x d (initial) or N x 2d (transition pairs)
  int dim = 0;
};

/// Discrete-time stochastic system: x' = step(x) + w, w ~ N(0, diag(noise^2)).
struct SystemSpec {
  std::string name;
  int d = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> step;
  Eigen::VectorXd noise_std;
  double dt = 0.1;
  Eigen::VectorXd init_mean;
  Eigen::VectorXd init_std;
};

/// Built-in benchmark systems: "ou1d", "vdp2d", "cartpole4d", "quad6d".
/// All dynamics constants are overridable through the params object.
SystemSpec make_system(const std::string& name, const nlohmann::json& params);
SystemSpec make_system(const std::string& name);
std::vector<std::string> system_names();

struct SimulationResult {
  std::vector<Eigen::MatrixXd> states;  // (steps+1) matrices of N x d
  std::vector<std::uint8_t> valid;      // particles that stayed finite throughout

  /// States with invalid particles removed.
  std::vector<Eigen::MatrixXd> compact() const;
};

/// Seeded Monte Carlo rollout; particle p draws its step-k noise from the
/// counter-based stream (seed, p) at counter k*d+m, so runs are reproducible
/// and trivially parallel.
SimulationResult simulate(const SystemSpec& system, const Eigen::MatrixXd& x0, int steps,
                          std::uint64_t seed);

/// Deterministic sub-seed for a named role within a generation run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view role);

/// Draws from the system's Gaussian initial sampler.
Eigen::MatrixXd sample_initial_states(const SystemSpec& system, int count, std::uint64_t seed);

struct DatasetOptions {
  int trajectory_length = 10;
  int burn_in = 0;
  double uniform_mix = 0.5;  // fraction of conditioners drawn uniformly in the box
  double sigma_inflation = 3.0;
};

struct DatasetBundle {
  Dataset initial;      // box space
  Dataset transitions;  // box space
  BoxTransform transform;
};

/// Generates the initial-state and transition datasets. Conditioners mix
/// on-trajectory states with uniform box exploration; the transform is fit on
/// the union of initial samples and trajectory states; everything is returned
/// in box space, strictly interior after clamping.
DatasetBundle make_datasets(const SystemSpec& system, int n_initial, int n_transitions,
                            std::uint64_t seed, const DatasetOptions& options = {});

struct StepLikelihood {
  int step = 0;
  double mean_log_density = 0.0;
  int n_used = 0;
  int n_excluded = 0;  // particles in the transform's clamp region
};

/// Average log-likelihood of Monte Carlo particles under per-step beliefs;
/// beliefs[k] scores states[k]. Particles touching the clamp region are
/// excluded and counted.
std::vector<StepLikelihood> evaluate_llh(const std::vector<Belief>& beliefs,
                                         const std::vector<Eigen::MatrixXd>& states,
                                         const BoxTransform& t);

}  // namespace sosmp
