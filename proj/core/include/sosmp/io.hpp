#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sosmp/json_util.hpp"
#include "sosmp/systems.hpp"
#include "sosmp/training.hpp"

namespace sosmp {

// CSV persistence. Doubles are written with 17 significant digits so reruns
// under the same seed produce byte-identical files.
void write_initial_csv(const std::string& path, const Eigen::MatrixXd& points);
Eigen::MatrixXd read_initial_csv(const std::string& path);
void write_transition_csv(const std::string& path, const Eigen::MatrixXd& pairs, int d);
Eigen::MatrixXd read_transition_csv(const std::string& path, int* d_out);
void write_report_csv(const std::string& path, const TrainReport& report);
void write_grid_csv(const std::string& path, const Eigen::MatrixXd& grid,
                    const Eigen::VectorXd& grid_x, const Eigen::VectorXd& grid_y);
void write_metrics_csv(const std::string& path, const std::vector<StepLikelihood>& metrics);

/// Full run configuration; every block is validated strictly (unknown keys are
/// rejected) before any work happens.
struct RunConfig {
  std::uint64_t seed = 0;
  nlohmann::json system = nlohmann::json{{"name", "vdp2d"}};

  struct DataBlock {
    int n_initial = 2000;
    int n_transitions = 10000;
    DatasetOptions options;
  } data;

  TrainConfig train;

  struct PropagateBlock {
    int steps = 10;
    std::vector<std::pair<int, int>> marginal_dims;
    int grid = 40;
  } propagate;

  struct EvaluateBlock {
    int mc_particles = 10000;
    int steps = 10;
  } evaluate;

  std::string output_dir = "out";

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

}  // namespace sosmp
