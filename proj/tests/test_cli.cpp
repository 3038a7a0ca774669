#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "sosmp/io.hpp"
#include "sosmp/rf_cde.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sosmp;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SOSMP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sosmp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json smoke_config() {
  return json{
      {"seed", 7},
      {"system", {{"name", "ou1d"}}},
      {"data", {{"n_initial", 400}, {"n_transitions", 2000}}},
      {"train",
       {{"n", 3},
        {"learning_rate", 0.1},
        {"batch_size", 256},
        {"epochs", 200},
        {"seed", 7}}},
      {"propagate", {{"steps", 5}}},
      {"evaluate", {{"mc_particles", 2000}, {"steps", 5}}},
  };
}

void write_config(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2);
}

}  // namespace

TEST_CASE("gen-data writes datasets deterministically") {
  const fs::path dir_a = fresh_dir("gen_a");
  const fs::path dir_b = fresh_dir("gen_b");
  const fs::path cfg = dir_a / "config.json";
  write_config(cfg, smoke_config());

  REQUIRE(run_cli("gen-data --config " + cfg.string() + " --out " + dir_a.string()) == 0);
  REQUIRE(run_cli("gen-data --config " + cfg.string() + " --out " + dir_b.string()) == 0);

  CHECK(slurp(dir_a / "initial.csv") == slurp(dir_b / "initial.csv"));
  CHECK(slurp(dir_a / "transitions.csv") == slurp(dir_b / "transitions.csv"));
  CHECK(slurp(dir_a / "transform.json") == slurp(dir_b / "transform.json"));

  const Eigen::MatrixXd initial = read_initial_csv((dir_a / "initial.csv").string());
  CHECK(initial.rows() == 400);
  int d = 0;
  const Eigen::MatrixXd transitions =
      read_transition_csv((dir_a / "transitions.csv").string(), &d);
  CHECK(transitions.rows() == 2000);
  CHECK(d == 1);
}

TEST_CASE("gen-data with zero transitions writes a header-only CSV") {
  const fs::path dir = fresh_dir("gen_zero");
  json cfg = smoke_config();
  cfg["data"]["n_transitions"] = 0;
  write_config(dir / "config.json", cfg);
  REQUIRE(run_cli("gen-data --config " + (dir / "config.json").string() + " --out " +
                  dir.string()) == 0);
  CHECK(slurp(dir / "transitions.csv") == "x_1,xp_1\n");
}

TEST_CASE("full pipeline on the 1d smoke system") {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path cfg = dir / "config.json";
  write_config(cfg, smoke_config());
  const std::string common = "--config " + cfg.string() + " --out " + dir.string();

  REQUIRE(run_cli("gen-data " + common) == 0);
  REQUIRE(run_cli("train " + common) == 0);

  // The saved model passes its own load-time validation and carries the
  // expected parameter count.
  const RationalFactorCDE model =
      RationalFactorCDE::from_json(load_json_file((dir / "model.json").string()));
  CHECK(model.normalization().residual <= 1e-8);
  CHECK(model.count_parameters() == 3 * 3 + 3 * 3 + 2 * 3 * 1 + 2 * 3 * 1);
  CHECK(fs::exists(dir / "initial_belief.json"));
  CHECK(fs::exists(dir / "train_report.csv"));

  REQUIRE(run_cli("propagate " + common) == 0);
  for (int k = 0; k <= 5; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "belief_%03d.json", k);
    CHECK(fs::exists(dir / name));
  }

  REQUIRE(run_cli("evaluate " + common) == 0);
  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind("step,avg_log_likelihood,n_used,n_excluded\n", 0) == 0);

  // Determinism of the evaluation under a fixed seed.
  const fs::path dir2 = fresh_dir("pipeline2");
  fs::copy(dir, dir2, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  REQUIRE(run_cli("evaluate --config " + cfg.string() + " --out " + dir2.string()) == 0);
  CHECK(slurp(dir2 / "metrics.csv") == metrics);
}

TEST_CASE("propagate with zero steps writes only the initial belief") {
  const fs::path dir = fresh_dir("prop_zero");
  json cfg = smoke_config();
  cfg["propagate"]["steps"] = 0;
  cfg["train"]["epochs"] = 30;
  write_config(dir / "config.json", cfg);
  const std::string common =
      "--config " + (dir / "config.json").string() + " --out " + dir.string();
  REQUIRE(run_cli("gen-data " + common) == 0);
  REQUIRE(run_cli("train " + common) == 0);
  REQUIRE(run_cli("propagate " + common) == 0);
  CHECK(fs::exists(dir / "belief_000.json"));
  CHECK(!fs::exists(dir / "belief_001.json"));
}

TEST_CASE("uniform model produces flat marginal grids") {
  const fs::path dir = fresh_dir("uniform_grids");
  // Hand-build the exactly-uniform 2d model and its uniform initial belief.
  const BetaBasis c1 = BetaBasis::constant(1, 2);
  const RationalFactorCDE model(c1, c1, Eigen::MatrixXd::Ones(1, 1));
  save_json_file((dir / "model.json").string(), model.to_json());
  PropagationEngine engine(model);
  const Belief uniform = engine.initial_belief(BetaBasis::constant(1, 2),
                                               Eigen::MatrixXd::Ones(1, 1));
  save_json_file((dir / "initial_belief.json").string(), uniform.to_json());

  json cfg = smoke_config();
  cfg["system"] = json{{"name", "vdp2d"}};
  cfg["propagate"] = json{{"steps", 3}, {"marginal_dims", {{0, 1}}}, {"grid", 8}};
  write_config(dir / "config.json", cfg);
  REQUIRE(run_cli("propagate --config " + (dir / "config.json").string() + " --out " +
                  dir.string()) == 0);

  for (int k = 0; k <= 3; ++k) {
    char name[64];
    std::snprintf(name, sizeof(name), "marginal_%03d_d0_d1.csv", k);
    std::istringstream rows(slurp(dir / name));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "x,y,density");
    int count = 0;
    while (std::getline(rows, line)) {
      const auto pos = line.rfind(',');
      CHECK(std::abs(std::stod(line.substr(pos + 1)) - 1.0) < 1e-9);
      ++count;
    }
    CHECK(count == 64);
  }
}

TEST_CASE("validation failures exit with code 2") {
  const fs::path dir = fresh_dir("valfail");
  json cfg = smoke_config();
  cfg["trian"] = json{{"n", 3}};  // unknown top-level key
  write_config(dir / "config.json", cfg);
  CHECK(run_cli("gen-data --config " + (dir / "config.json").string() + " --out " +
                dir.string()) == 2);

  write_config(dir / "config.json", smoke_config());
  CHECK(run_cli("train --config " + (dir / "config.json").string() + " --out " +
                dir.string()) == 2);  // datasets missing

  // A corrupted model file is refused.
  const fs::path dir2 = fresh_dir("corrupt");
  write_config(dir2 / "config.json", smoke_config());
  const BetaBasis c1 = BetaBasis::constant(1, 1);
  const RationalFactorCDE model(c1, c1, Eigen::MatrixXd::Ones(1, 1));
  json mj = model.to_json();
  mj["scale_lambda"] = mj["scale_lambda"].get<double>() * 3.0;
  save_json_file((dir2 / "model.json").string(), mj);
  PropagationEngine engine(model);
  save_json_file((dir2 / "initial_belief.json").string(),
                 engine.initial_belief(c1, Eigen::MatrixXd::Ones(1, 1)).to_json());
  CHECK(run_cli("propagate --config " + (dir2 / "config.json").string() + " --out " +
                dir2.string()) == 2);
}
