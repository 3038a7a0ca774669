// Command-line front end: dataset generation, two-stage training, analytic
// belief propagation and Monte Carlo evaluation, wired through a JSON config.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "sosmp/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
  const char* env = std::getenv("SOSMP_LOG");
  return env ? std::atoi(env) : 0;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[sosmp] " << msg << '\n';
}

struct Paths {
  fs::path dir;
  fs::path initial() const { return dir / "initial.csv"; }
  fs::path transitions() const { return dir / "transitions.csv"; }
  fs::path transform() const { return dir / "transform.json"; }
  fs::path model() const { return dir / "model.json"; }
  fs::path initial_belief() const { return dir / "initial_belief.json"; }
  fs::path report() const { return dir / "train_report.csv"; }
  fs::path belief(int k) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "belief_%03d.json", k);
    return dir / buf;
  }
  fs::path marginal(int k, int a, int b) const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "marginal_%03d_d%d_d%d.csv", k, a, b);
    return dir / buf;
  }
  fs::path metrics() const { return dir / "metrics.csv"; }
};

sosmp::RunConfig load_config(const std::string& config_path, const std::string& out_override,
                             bool seed_overridden, std::uint64_t seed_override) {
  sosmp::RunConfig cfg = sosmp::RunConfig::load(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed_overridden) {
    cfg.seed = seed_override;
    cfg.train.seed = seed_override;
  } else {
    cfg.train.seed = cfg.seed;
  }
  return cfg;
}

int cmd_gen_data(const sosmp::RunConfig& cfg) {
  const sosmp::SystemSpec system =
      sosmp::make_system(cfg.system.at("name").get<std::string>(), cfg.system);
  const sosmp::DatasetBundle bundle = sosmp::make_datasets(
      system, cfg.data.n_initial, cfg.data.n_transitions, cfg.seed, cfg.data.options);
  Paths paths{cfg.output_dir};
  fs::create_directories(paths.dir);
  sosmp::write_initial_csv(paths.initial().string(), bundle.initial.points);
  sosmp::write_transition_csv(paths.transitions().string(), bundle.transitions.points, system.d);
  sosmp::save_json_file(paths.transform().string(), bundle.transform.to_json());
  std::cout << "wrote " << bundle.initial.points.rows() << " initial rows, "
            << bundle.transitions.points.rows() << " transition rows to " << paths.dir.string()
            << '\n';
  return 0;
}

int cmd_train(const sosmp::RunConfig& cfg) {
  Paths paths{cfg.output_dir};
  int d = 0;
  const Eigen::MatrixXd transitions = sosmp::read_transition_csv(paths.transitions().string(), &d);
  const Eigen::MatrixXd x0s = sosmp::read_initial_csv(paths.initial().string());
  info("training conditional model: n=" + std::to_string(cfg.train.n_basis) +
       ", d=" + std::to_string(d));
  auto [model, report] = sosmp::train_cde(transitions, cfg.train);
  sosmp::TrainReport initial_report;
  const sosmp::Belief h0 = sosmp::train_initial(x0s, model, cfg.train, &initial_report);
  sosmp::save_json_file(paths.model().string(), model.to_json());
  sosmp::save_json_file(paths.initial_belief().string(), h0.to_json());
  sosmp::write_report_csv(paths.report().string(), report);

  // The saved file must pass its own load-time residual validation.
  const sosmp::RationalFactorCDE reloaded =
      sosmp::RationalFactorCDE::from_json(sosmp::load_json_file(paths.model().string()));
  std::cout << "model: n=" << reloaded.n() << " d=" << reloaded.d()
            << " parameters=" << reloaded.count_parameters()
            << " (+" << sosmp::count_initial_parameters(reloaded.n(), reloaded.d())
            << " initial)" << '\n';
  std::cout << "best epoch " << report.best_epoch << ", residual "
            << sosmp::format_double(reloaded.normalization().residual) << '\n';
  return 0;
}

int cmd_propagate(const sosmp::RunConfig& cfg) {
  Paths paths{cfg.output_dir};
  const sosmp::RationalFactorCDE model =
      sosmp::RationalFactorCDE::from_json(sosmp::load_json_file(paths.model().string()));
  sosmp::PropagationEngine engine(model);
  sosmp::Belief belief =
      sosmp::Belief::from_json(sosmp::load_json_file(paths.initial_belief().string()), model);

  auto report_step = [&](const sosmp::Belief& b, double mass) {
    const auto [mean, var] = engine.moments(b);
    std::cout << "k=" << b.step() << " mass=" << sosmp::format_double(mass) << " mean=[";
    for (int m = 0; m < mean.size(); ++m) std::cout << (m ? " " : "") << mean[m];
    std::cout << "] var=[";
    for (int m = 0; m < var.size(); ++m) std::cout << (m ? " " : "") << var[m];
    std::cout << "]\n";
  };

  auto dump = [&](const sosmp::Belief& b) {
    sosmp::save_json_file(paths.belief(b.step()).string(), b.to_json());
    for (const auto& [da, db] : cfg.propagate.marginal_dims) {
      const Eigen::MatrixXd grid = engine.marginal_grid(b, da, db, cfg.propagate.grid);
      Eigen::VectorXd centers(cfg.propagate.grid);
      for (int t = 0; t < cfg.propagate.grid; ++t) centers[t] = (t + 0.5) / cfg.propagate.grid;
      sosmp::write_grid_csv(paths.marginal(b.step(), da, db).string(), grid, centers, centers);
    }
  };

  report_step(belief, engine.integrate_belief(belief));
  dump(belief);
  for (int k = 0; k < cfg.propagate.steps; ++k) {
    const sosmp::PropagationResult step = engine.propagate(belief);
    belief = step.belief;
    report_step(belief, step.raw_mass);
    dump(belief);
  }
  return 0;
}

int cmd_evaluate(const sosmp::RunConfig& cfg) {
  Paths paths{cfg.output_dir};
  const sosmp::RationalFactorCDE model =
      sosmp::RationalFactorCDE::from_json(sosmp::load_json_file(paths.model().string()));
  sosmp::PropagationEngine engine(model);
  sosmp::Belief belief =
      sosmp::Belief::from_json(sosmp::load_json_file(paths.initial_belief().string()), model);
  const sosmp::BoxTransform transform =
      sosmp::BoxTransform::from_json(sosmp::load_json_file(paths.transform().string()));
  const sosmp::SystemSpec system =
      sosmp::make_system(cfg.system.at("name").get<std::string>(), cfg.system);

  std::vector<sosmp::Belief> beliefs{belief};
  for (int k = 0; k < cfg.evaluate.steps; ++k) {
    belief = engine.propagate(belief).belief;
    beliefs.push_back(belief);
  }
  const Eigen::MatrixXd x0 = sosmp::sample_initial_states(
      system, cfg.evaluate.mc_particles, sosmp::derive_seed(cfg.seed, "mc"));
  const sosmp::SimulationResult sim =
      simulate(system, x0, cfg.evaluate.steps, sosmp::derive_seed(cfg.seed, "mc_noise"));
  const auto metrics = sosmp::evaluate_llh(beliefs, sim.compact(), transform);
  sosmp::write_metrics_csv(paths.metrics().string(), metrics);
  for (const auto& m : metrics) {
    std::cout << "k=" << m.step << " avg_llh=" << sosmp::format_double(m.mean_log_density)
              << " used=" << m.n_used << " excluded=" << m.n_excluded << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rational-factor sum-of-squares Markov process modeling"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate datasets and the box transform");
  CLI::App* train = app.add_subcommand("train", "train the conditional model and initial belief");
  CLI::App* prop = app.add_subcommand("propagate", "propagate the belief analytically");
  CLI::App* eval = app.add_subcommand("evaluate", "score beliefs against Monte Carlo rollouts");
  for (CLI::App* c : {gen, train, prop, eval}) add_common(c);

  CLI11_PARSE(app, argc, argv);

  try {
    const sosmp::RunConfig cfg =
        load_config(config_path, out_override, seed_given, seed_override);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (prop->parsed()) return cmd_propagate(cfg);
    if (eval->parsed()) return cmd_evaluate(cfg);
  } catch (const sosmp::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sosmp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
