#include "sosmp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sosmp {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
  if (!j.is_object()) {
    throw ValidationError(context + ": expected a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ValidationError(context + ": unknown key '" + it.key() + "'");
    }
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("failed to parse '" + path + "': " + e.what());
  }
  return j;
}

void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

Eigen::MatrixXd read_csv_matrix(const std::string& path, std::string* header) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV '" + path + "'");
  *header = line;
  std::vector<std::vector<double>> rows;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols) throw ValidationError("ragged CSV '" + path + "'");
    rows.push_back(std::move(row));
  }
  const auto n_header = static_cast<std::size_t>(
      1 + std::count(header->begin(), header->end(), ','));
  if (cols == 0) cols = n_header;
  if (cols != n_header) throw ValidationError("CSV header/body mismatch in '" + path + "'");
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = rows[i][c];
  }
  return m;
}

}  // namespace

void write_initial_csv(const std::string& path, const Eigen::MatrixXd& points) {
  std::ostringstream oss;
  for (Eigen::Index m = 0; m < points.cols(); ++m) {
    oss << (m ? "," : "") << "x_" << (m + 1);
  }
  oss << '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index m = 0; m < points.cols(); ++m) {
      oss << (m ? "," : "") << format_double(points(i, m));
    }
    oss << '\n';
  }
  write_text(path, oss.str());
}

Eigen::MatrixXd read_initial_csv(const std::string& path) {
  std::string header;
  return read_csv_matrix(path, &header);
}

void write_transition_csv(const std::string& path, const Eigen::MatrixXd& pairs, int d) {
  if (pairs.cols() != 2 * d) throw std::invalid_argument("write_transition_csv: bad shape");
  std::ostringstream oss;
  for (int m = 0; m < d; ++m) oss << (m ? "," : "") << "x_" << (m + 1);
  for (int m = 0; m < d; ++m) oss << ",xp_" << (m + 1);
  oss << '\n';
  for (Eigen::Index i = 0; i < pairs.rows(); ++i) {
    for (Eigen::Index m = 0; m < pairs.cols(); ++m) {
      oss << (m ? "," : "") << format_double(pairs(i, m));
    }
    oss << '\n';
  }
  write_text(path, oss.str());
}

Eigen::MatrixXd read_transition_csv(const std::string& path, int* d_out) {
  std::string header;
  Eigen::MatrixXd m = read_csv_matrix(path, &header);
  if (m.cols() % 2 != 0) throw ValidationError("transition CSV must have 2d columns");
  if (d_out) *d_out = static_cast<int>(m.cols()) / 2;
  return m;
}

void write_report_csv(const std::string& path, const TrainReport& report) {
  write_text(path, report.to_csv());
}

void write_grid_csv(const std::string& path, const Eigen::MatrixXd& grid,
                    const Eigen::VectorXd& grid_x, const Eigen::VectorXd& grid_y) {
  if (grid.rows() != grid_x.size() || grid.cols() != grid_y.size()) {
    throw std::invalid_argument("write_grid_csv: grid shape mismatch");
  }
  std::ostringstream oss;
  oss << "x,y,density\n";
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      oss << format_double(grid_x[i]) << ',' << format_double(grid_y[j]) << ','
          << format_double(grid(i, j)) << '\n';
    }
  }
  write_text(path, oss.str());
}

void write_metrics_csv(const std::string& path, const std::vector<StepLikelihood>& metrics) {
  std::ostringstream oss;
  oss << "step,avg_log_likelihood,n_used,n_excluded\n";
  for (const auto& m : metrics) {
    oss << m.step << ',' << format_double(m.mean_log_density) << ',' << m.n_used << ','
        << m.n_excluded << '\n';
  }
  write_text(path, oss.str());
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "system", "data", "train", "propagate", "evaluate", "output"}, "config");
  RunConfig c;
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("system")) {
    c.system = j.at("system");
    if (!c.system.contains("name")) throw ValidationError("system.name is required");
    // Full key validation happens in make_system per system.
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"n_initial", "n_transitions", "trajectory_length", "burn_in", "uniform_mix",
                   "sigma_inflation"},
               "data");
    c.data.n_initial = d.value("n_initial", c.data.n_initial);
    c.data.n_transitions = d.value("n_transitions", c.data.n_transitions);
    c.data.options.trajectory_length =
        d.value("trajectory_length", c.data.options.trajectory_length);
    c.data.options.burn_in = d.value("burn_in", c.data.options.burn_in);
    c.data.options.uniform_mix = d.value("uniform_mix", c.data.options.uniform_mix);
    c.data.options.sigma_inflation = d.value("sigma_inflation", c.data.options.sigma_inflation);
    if (c.data.n_initial < 0 || c.data.n_transitions < 0) {
      throw ValidationError("data counts must be non-negative");
    }
    if (c.data.options.uniform_mix < 0.0 || c.data.options.uniform_mix > 1.0) {
      throw ValidationError("data.uniform_mix must be in [0, 1]");
    }
  }
  if (j.contains("train")) {
    c.train = TrainConfig::from_json(j.at("train"));
  }
  if (j.contains("propagate")) {
    const auto& p = j.at("propagate");
    check_keys(p, {"steps", "marginal_dims", "grid"}, "propagate");
    c.propagate.steps = p.value("steps", c.propagate.steps);
    c.propagate.grid = p.value("grid", c.propagate.grid);
    if (p.contains("marginal_dims")) {
      for (const auto& pair : p.at("marginal_dims")) {
        const auto v = pair.get<std::vector<int>>();
        if (v.size() != 2) throw ValidationError("propagate.marginal_dims entries must be pairs");
        c.propagate.marginal_dims.emplace_back(v[0], v[1]);
      }
    }
    if (c.propagate.steps < 0) throw ValidationError("propagate.steps must be >= 0");
    if (c.propagate.grid < 2) throw ValidationError("propagate.grid must be >= 2");
  }
  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    check_keys(e, {"mc_particles", "steps"}, "evaluate");
    c.evaluate.mc_particles = e.value("mc_particles", c.evaluate.mc_particles);
    c.evaluate.steps = e.value("steps", c.evaluate.steps);
    if (c.evaluate.mc_particles < 1) throw ValidationError("evaluate.mc_particles must be >= 1");
    if (c.evaluate.steps < 0) throw ValidationError("evaluate.steps must be >= 0");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    check_keys(o, {"dir"}, "output");
    c.output_dir = o.value("dir", c.output_dir);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_json(load_json_file(path));
}

}  // namespace sosmp
