#include "sosmp/systems.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "sosmp/json_util.hpp"
#include "sosmp/rng.hpp"
#include "sosmp/special_functions.hpp"

namespace sosmp {

// ---------------------------------------------------------------------------
// Box transform

Eigen::VectorXd BoxTransform::to_box(const Eigen::VectorXd& x) const {
  bool ignored = false;
  return to_box(x, &ignored);
}

Eigen::VectorXd BoxTransform::to_box(const Eigen::VectorXd& x, bool* clamped) const {
  if (x.size() != mu.size()) throw std::invalid_argument("BoxTransform: dimension mismatch");
  Eigen::VectorXd u(x.size());
  *clamped = false;
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    const double raw = norm_cdf((x[m] - mu[m]) / sigma[m]);
    if (raw < clamp_eps || raw > 1.0 - clamp_eps) *clamped = true;
    u[m] = std::min(std::max(raw, clamp_eps), 1.0 - clamp_eps);
  }
  return u;
}

Eigen::VectorXd BoxTransform::to_original(const Eigen::VectorXd& u) const {
  if (u.size() != mu.size()) throw std::invalid_argument("BoxTransform: dimension mismatch");
  Eigen::VectorXd x(u.size());
  for (Eigen::Index m = 0; m < u.size(); ++m) {
    x[m] = mu[m] + sigma[m] * inv_norm_cdf(u[m]);
  }
  return x;
}

nlohmann::json BoxTransform::to_json() const {
  return nlohmann::json{
      {"mu", std::vector<double>(mu.data(), mu.data() + mu.size())},
      {"sigma", std::vector<double>(sigma.data(), sigma.data() + sigma.size())},
      {"clamp_eps", clamp_eps}};
}

BoxTransform BoxTransform::from_json(const nlohmann::json& j) {
  check_keys(j, {"mu", "sigma", "clamp_eps"}, "transform");
  BoxTransform t;
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto sg = j.at("sigma").get<std::vector<double>>();
  if (mu.size() != sg.size() || mu.empty()) {
    throw ValidationError("transform: mu and sigma must be nonempty and equal length");
  }
  t.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), mu.size());
  t.sigma = Eigen::Map<const Eigen::VectorXd>(sg.data(), sg.size());
  t.clamp_eps = j.value("clamp_eps", 1e-6);
  if ((t.sigma.array() <= 0.0).any()) throw ValidationError("transform: sigma must be > 0");
  return t;
}

BoxTransform fit_transform(const Eigen::MatrixXd& samples, double sigma_inflation) {
  if (samples.rows() < 2) throw ValidationError("fit_transform: need at least 2 samples");
  BoxTransform t;
  const Eigen::Index n = samples.rows();
  t.mu = samples.colwise().mean();
  Eigen::VectorXd var(samples.cols());
  for (Eigen::Index m = 0; m < samples.cols(); ++m) {
    var[m] = (samples.col(m).array() - t.mu[m]).square().sum() / (n - 1);
    if (!(var[m] > 0.0)) {
      throw ValidationError("fit_transform: zero variance in dimension " + std::to_string(m));
    }
  }
  t.sigma = sigma_inflation * var.cwiseSqrt();
  return t;
}

double density_change_of_variables(double box_density, const Eigen::VectorXd& x_original,
                                   const BoxTransform& t, bool* warned);

double density_change_of_variables(double box_density, const Eigen::VectorXd& x_original,
                                   const BoxTransform& t) {
  bool clamped = false;
  (void)t.to_box(x_original, &clamped);
  double jac = 1.0;
  for (Eigen::Index m = 0; m < x_original.size(); ++m) {
    jac *= norm_pdf((x_original[m] - t.mu[m]) / t.sigma[m]) / t.sigma[m];
  }
  return box_density * jac;
}

// ---------------------------------------------------------------------------
// Systems

namespace {

Eigen::VectorXd json_vector(const nlohmann::json& j, const char* key, const Eigen::VectorXd& def) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (v.is_number()) {
    return Eigen::VectorXd::Constant(def.size(), v.get<double>());
  }
  const auto vec = v.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(vec.size()) != def.size()) {
    throw ValidationError(std::string("system.") + key + ": wrong length");
  }
  return Eigen::Map<const Eigen::VectorXd>(vec.data(), vec.size());
}

SystemSpec make_ou1d(const nlohmann::json& p) {
  check_keys(p, {"name", "theta", "dt", "noise_std", "init_mean", "init_std"}, "system");
  SystemSpec s;
  s.name = "ou1d";
  s.d = 1;
  s.dt = p.value("dt", 0.1);
  const double theta = p.value("theta", 1.0);
  const double dt = s.dt;
  s.step = [theta, dt](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(1);
    out[0] = x[0] + dt * (-theta * x[0]);
    return out;
  };
  s.noise_std = json_vector(p, "noise_std", Eigen::VectorXd::Constant(1, 0.05));
  s.init_mean = json_vector(p, "init_mean", Eigen::VectorXd::Constant(1, 0.5));
  s.init_std = json_vector(p, "init_std", Eigen::VectorXd::Constant(1, 0.2));
  return s;
}

SystemSpec make_vdp2d(const nlohmann::json& p) {
  check_keys(p, {"name", "mu", "dt", "noise_std", "init_mean", "init_std"}, "system");
  SystemSpec s;
  s.name = "vdp2d";
  s.d = 2;
  s.dt = p.value("dt", 0.1);
  const double mu = p.value("mu", 1.0);
  const double dt = s.dt;
  s.step = [mu, dt](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(2);
    out[0] = x[0] + dt * x[1];
    out[1] = x[1] + dt * (mu * (1.0 - x[0] * x[0]) * x[1] - x[0]);
    return out;
  };
  s.noise_std = json_vector(p, "noise_std", Eigen::VectorXd::Constant(2, 0.05));
  Eigen::VectorXd im(2);
  im << 1.5, 0.0;
  s.init_mean = json_vector(p, "init_mean", im);
  s.init_std = json_vector(p, "init_std", Eigen::VectorXd::Constant(2, 0.1));
  return s;
}

SystemSpec make_cartpole4d(const nlohmann::json& p) {
  check_keys(p, {"name", "cart_mass", "pole_mass", "pole_length", "gravity", "gains", "dt",
                 "noise_std", "init_mean", "init_std"},
             "system");
  SystemSpec s;
  s.name = "cartpole4d";
  s.d = 4;
  s.dt = p.value("dt", 0.02);
  const double mc = p.value("cart_mass", 1.0);
  const double mp = p.value("pole_mass", 0.1);
  const double l = p.value("pole_length", 0.5);
  const double g = p.value("gravity", 9.81);
  Eigen::VectorXd gains(4);
  // LQR gains for the upright linearization at the default constants.
  gains << -3.1623, -5.9144, -49.5383, -12.8461;
  gains = json_vector(p, "gains", gains);
  const double dt = s.dt;
  s.step = [mc, mp, l, g, gains, dt](const Eigen::VectorXd& x) {
    const double v = x[1], th = x[2], w = x[3];
    const double u = -gains.dot(x);
    const double total = mc + mp;
    const double sin_th = std::sin(th), cos_th = std::cos(th);
    const double temp = (u + mp * l * w * w * sin_th) / total;
    const double th_acc =
        (g * sin_th - cos_th * temp) / (l * (4.0 / 3.0 - mp * cos_th * cos_th / total));
    const double x_acc = temp - mp * l * th_acc * cos_th / total;
    Eigen::VectorXd out(4);
    out[0] = x[0] + dt * v;
    out[1] = v + dt * x_acc;
    out[2] = th + dt * w;
    out[3] = w + dt * th_acc;
    return out;
  };
  s.noise_std = json_vector(p, "noise_std", Eigen::VectorXd::Constant(4, 0.01));
  Eigen::VectorXd im(4);
  im << 0.0, 0.0, 0.05, 0.0;
  s.init_mean = json_vector(p, "init_mean", im);
  s.init_std = json_vector(p, "init_std", Eigen::VectorXd::Constant(4, 0.02));
  return s;
}

SystemSpec make_quad6d(const nlohmann::json& p) {
  check_keys(p, {"name", "mass", "inertia", "gravity", "hover", "gains", "dt", "noise_std",
                 "init_mean", "init_std"},
             "system");
  SystemSpec s;
  s.name = "quad6d";
  s.d = 6;  // [x, y, vx, vy, rho, nu]
  s.dt = p.value("dt", 0.05);
  const double m = p.value("mass", 0.5);
  const double inertia = p.value("inertia", 0.01);
  const double g = p.value("gravity", 9.81);
  Eigen::VectorXd hover(2);
  hover << 0.0, 0.0;
  hover = json_vector(p, "hover", hover);
  // (kp_y, kd_y, kp_x, kd_x, kp_rho, kd_rho)
  Eigen::VectorXd gains(6);
  gains << 4.0, 3.0, 1.5, 1.8, 60.0, 12.0;
  gains = json_vector(p, "gains", gains);
  const double dt = s.dt;
  s.step = [m, inertia, g, hover, gains, dt](const Eigen::VectorXd& st) {
    const double x = st[0], y = st[1], vx = st[2], vy = st[3], rho = st[4], nu = st[5];
    const double thrust =
        std::max(0.0, m * (g + gains[0] * (hover[1] - y) + gains[1] * (0.0 - vy)));
    const double ax_des = gains[2] * (hover[0] - x) + gains[3] * (0.0 - vx);
    const double rho_des = std::clamp(-ax_des / g, -0.4, 0.4);
    const double moment = inertia * (gains[4] * (rho_des - rho) + gains[5] * (0.0 - nu));
    Eigen::VectorXd out(6);
    out[0] = x + dt * vx;
    out[1] = y + dt * vy;
    out[2] = vx + dt * (-thrust * std::sin(rho) / m);
    out[3] = vy + dt * (thrust * std::cos(rho) / m - g);
    out[4] = rho + dt * nu;
    out[5] = nu + dt * (moment / inertia);
    return out;
  };
  s.noise_std = json_vector(p, "noise_std", Eigen::VectorXd::Constant(6, 0.02));
  Eigen::VectorXd im(6);
  im << 0.5, 0.5, 0.0, 0.0, 0.0, 0.0;
  s.init_mean = json_vector(p, "init_mean", im);
  Eigen::VectorXd is(6);
  is << 0.1, 0.1, 0.05, 0.05, 0.02, 0.02;
  s.init_std = json_vector(p, "init_std", is);
  return s;
}

}  // namespace

std::vector<std::string> system_names() { return {"ou1d", "vdp2d", "cartpole4d", "quad6d"}; }

SystemSpec make_system(const std::string& name, const nlohmann::json& params) {
  if (name == "ou1d") return make_ou1d(params);
  if (name == "vdp2d") return make_vdp2d(params);
  if (name == "cartpole4d") return make_cartpole4d(params);
  if (name == "quad6d") return make_quad6d(params);
  throw ValidationError("unknown system '" + name + "'");
}

SystemSpec make_system(const std::string& name) {
  return make_system(name, nlohmann::json::object());
}

// ---------------------------------------------------------------------------
// Simulation and datasets

std::uint64_t derive_seed(std::uint64_t seed, std::string_view role) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : role) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return splitmix64(seed ^ h);
}

SimulationResult simulate(const SystemSpec& system, const Eigen::MatrixXd& x0, int steps,
                          std::uint64_t seed) {
  if (x0.cols() != system.d) throw std::invalid_argument("simulate: state dimension mismatch");
  const int count = static_cast<int>(x0.rows());
  SimulationResult out;
  out.states.assign(steps + 1, Eigen::MatrixXd::Zero(count, system.d));
  out.valid.assign(count, 1);
  out.states[0] = x0;
  for (int p = 0; p < count; ++p) {
    Eigen::VectorXd x = x0.row(p).transpose();
    for (int k = 0; k < steps; ++k) {
      Eigen::VectorXd next = system.step(x);
      for (int m = 0; m < system.d; ++m) {
        next[m] += system.noise_std[m] *
                   RngStream::normal(seed, static_cast<std::uint64_t>(p),
                                     static_cast<std::uint64_t>(k) * system.d + m);
      }
      if (!next.allFinite()) {
        out.valid[p] = 0;
        break;
      }
      x = next;
      out.states[k + 1].row(p) = x.transpose();
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> SimulationResult::compact() const {
  int kept = 0;
  for (const auto v : valid) kept += v;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    Eigen::MatrixXd m(kept, s.cols());
    int at = 0;
    for (Eigen::Index p = 0; p < s.rows(); ++p) {
      if (valid[p]) m.row(at++) = s.row(p);
    }
    out.push_back(std::move(m));
  }
  return out;
}

Eigen::MatrixXd sample_initial_states(const SystemSpec& system, int count, std::uint64_t seed) {
  Eigen::MatrixXd x0(count, system.d);
  for (int i = 0; i < count; ++i) {
    for (int m = 0; m < system.d; ++m) {
      x0(i, m) = system.init_mean[m] +
                 system.init_std[m] *
                     RngStream::normal(seed, static_cast<std::uint64_t>(i), m);
    }
  }
  return x0;
}

DatasetBundle make_datasets(const SystemSpec& system, int n_initial, int n_transitions,
                            std::uint64_t seed, const DatasetOptions& options) {
  if (n_initial < 0 || n_transitions < 0) {
    throw ValidationError("make_datasets: counts must be non-negative");
  }
  if (n_initial == 0 && n_transitions == 0) {
    throw ValidationError("make_datasets: nothing to generate");
  }
  const int d = system.d;
  const int n_starts = std::max(n_initial, n_transitions > 0 ? 256 : 0);
  const Eigen::MatrixXd starts =
      sample_initial_states(system, std::max(n_starts, 2), derive_seed(seed, "initial"));

  // Trajectory pool for conditioners and for fitting the transform.
  Eigen::MatrixXd pool;
  if (n_transitions > 0) {
    const int len = options.burn_in + options.trajectory_length;
    const SimulationResult sim =
        simulate(system, starts, len, derive_seed(seed, "trajectory"));
    const auto states = sim.compact();
    const int per_step = static_cast<int>(states[0].rows());
    const int n_steps = len - options.burn_in + 1;
    pool.resize(static_cast<Eigen::Index>(per_step) * n_steps, d);
    int at = 0;
    for (int k = options.burn_in; k <= len; ++k) {
      pool.middleRows(at, per_step) = states[k];
      at += per_step;
    }
  }

  Eigen::MatrixXd fit_input(starts.rows() + pool.rows(), d);
  fit_input.topRows(starts.rows()) = starts;
  if (pool.rows() > 0) fit_input.bottomRows(pool.rows()) = pool;
  BoxTransform transform = fit_transform(fit_input, options.sigma_inflation);

  DatasetBundle bundle;
  bundle.transform = transform;

  bundle.initial.kind = DatasetKind::kInitial;
  bundle.initial.space = DataSpace::kBox;
  bundle.initial.dim = d;
  bundle.initial.points.resize(n_initial, d);
  for (int i = 0; i < n_initial; ++i) {
    bundle.initial.points.row(i) = transform.to_box(starts.row(i).transpose()).transpose();
  }

  bundle.transitions.kind = DatasetKind::kTransition;
  bundle.transitions.space = DataSpace::kBox;
  bundle.transitions.dim = d;
  bundle.transitions.points.resize(n_transitions, 2 * d);
  if (n_transitions > 0) {
    const int n_uniform = static_cast<int>(std::lround(options.uniform_mix * n_transitions));
    RngStream picker(derive_seed(seed, "picker"), 0);
    RngStream uniform(derive_seed(seed, "uniform"), 0);
    const std::uint64_t succ_seed = derive_seed(seed, "successor");
    for (int i = 0; i < n_transitions; ++i) {
      Eigen::VectorXd x(d);
      if (i < n_transitions - n_uniform && pool.rows() > 0) {
        x = pool.row(static_cast<Eigen::Index>(picker.next_uint(pool.rows()))).transpose();
      } else {
        Eigen::VectorXd u(d);
        for (int m = 0; m < d; ++m) u[m] = uniform.next_u01();
        u = u.cwiseMax(transform.clamp_eps).cwiseMin(1.0 - transform.clamp_eps);
        x = transform.to_original(u);
      }
      Eigen::VectorXd xp = system.step(x);
      for (int m = 0; m < d; ++m) {
        xp[m] += system.noise_std[m] *
                 RngStream::normal(succ_seed, static_cast<std::uint64_t>(i), m);
      }
      bundle.transitions.points.row(i).head(d) = transform.to_box(x).transpose();
      bundle.transitions.points.row(i).tail(d) = transform.to_box(xp).transpose();
    }
  }
  return bundle;
}

std::vector<StepLikelihood> evaluate_llh(const std::vector<Belief>& beliefs,
                                         const std::vector<Eigen::MatrixXd>& states,
                                         const BoxTransform& t) {
  if (beliefs.empty() || states.size() < beliefs.size()) {
    throw std::invalid_argument("evaluate_llh: need a belief per evaluated step");
  }
  std::vector<StepLikelihood> out;
  out.reserve(beliefs.size());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    StepLikelihood sl;
    sl.step = static_cast<int>(k);
    double acc = 0.0;
    for (Eigen::Index p = 0; p < states[k].rows(); ++p) {
      bool clamped = false;
      const Eigen::VectorXd u = t.to_box(states[k].row(p).transpose(), &clamped);
      if (clamped) {
        ++sl.n_excluded;
        continue;
      }
      acc += beliefs[k].log_eval(u);
      ++sl.n_used;
    }
    if (sl.n_used == 0) throw NumericError("evaluate_llh: no usable particles at step " +
                                           std::to_string(k));
    sl.mean_log_density = acc / sl.n_used;
    out.push_back(sl);
  }
  return out;
}

}  // namespace sosmp
