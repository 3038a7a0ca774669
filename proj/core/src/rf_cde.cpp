#include "sosmp/rf_cde.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "sosmp/json_util.hpp"
#include <stdexcept>

namespace sosmp {

namespace {

constexpr double kRealEigenvalueTol = 1e-9;   // |Im| <= tol * spectral radius counts as real
constexpr double kResidualTol = 1e-8;

struct Candidate {
  int index = -1;
  double lambda = 0.0;
  Eigen::MatrixXd R;
  double sign = 1.0;
  double asymmetry = 0.0;
  double r_min_eig = 0.0;
};

// Reshape an eigenvector into the symmetrized, sign-fixed, Frobenius-norm-n
// coefficient matrix of g.
Candidate make_candidate(const GeneralEigen& eig, int idx, int n) {
  Candidate c;
  c.index = idx;
  c.lambda = eig.values[idx].real();
  Eigen::VectorXd v = eig.vectors.col(idx).real();
  Eigen::MatrixXd raw(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      raw(i, j) = v[i * n + j];
    }
  }
  Eigen::MatrixXd s = 0.5 * (raw + raw.transpose());
  const double raw_norm = raw.norm();
  c.asymmetry = raw_norm > 0.0 ? 0.5 * (raw - raw.transpose()).norm() / raw_norm : 0.0;
  c.sign = s.trace() < 0.0 ? -1.0 : 1.0;
  s *= c.sign;
  const double f = s.norm();
  if (!(f > 0.0)) {
    c.R = Eigen::MatrixXd::Zero(n, n);
    c.r_min_eig = 0.0;
    return c;
  }
  c.R = s * (static_cast<double>(n) / f);
  c.r_min_eig = min_eigenvalue(c.R);
  return c;
}

}  // namespace

CrossMomentTensor normalization_tensor(const BetaBasis& phi, const BetaBasis& psi) {
  return cross_moment_tensor(psi, phi, "psi", "phi");
}

NormalizationSolution solve_normalization(const PsdFactor& L, const CrossMomentTensor& e_norm,
                                          EigenvaluePick pick) {
  NormalizationSolution out;
  const int n = L.size();
  if (e_norm.n() != n) {
    throw std::invalid_argument("solve_normalization: tensor size mismatch");
  }
  const Eigen::MatrixXd q0 = L.gram();
  Eigen::MatrixXd m0 = e_norm.matrix();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m0.row(i * n + j) *= q0(i, j);
    }
  }

  GeneralEigen eig;
  try {
    eig = general_real_eigen(m0);
  } catch (const std::exception&) {
    return out;  // infeasible, never a crash
  }
  const double rho = eig.values.cwiseAbs().maxCoeff();
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    return out;
  }
  auto shared = std::make_shared<GeneralEigen>(std::move(eig));
  out.eigen = shared;

  std::vector<int> candidates;
  for (int i = 0; i < shared->values.size(); ++i) {
    const auto ev = shared->values[i];
    if (std::abs(ev.imag()) <= kRealEigenvalueTol * rho && ev.real() > 0.0) {
      candidates.push_back(i);
    }
  }
  out.n_positive_real = static_cast<int>(candidates.size());
  if (candidates.empty()) {
    return out;
  }
  out.has_positive_real = true;

  int best = -1;
  Candidate chosen;
  if (pick == EigenvaluePick::kLargestPositive) {
    for (int idx : candidates) {
      if (best < 0 || shared->values[idx].real() > shared->values[best].real()) {
        best = idx;
      }
    }
    chosen = make_candidate(*shared, best, n);
    for (int idx : candidates) {
      if (make_candidate(*shared, idx, n).r_min_eig > 0.0) ++out.n_pd_candidates;
    }
  } else {
    double best_margin = -std::numeric_limits<double>::infinity();
    for (int idx : candidates) {
      Candidate c = make_candidate(*shared, idx, n);
      if (c.r_min_eig > 0.0) ++out.n_pd_candidates;
      if (c.r_min_eig > best_margin) {
        best_margin = c.r_min_eig;
        best = idx;
        chosen = std::move(c);
      }
    }
  }

  out.picked = chosen.index;
  out.scale_lambda = chosen.lambda;
  out.sign = chosen.sign;
  out.asymmetry = chosen.asymmetry;
  out.R = chosen.R;
  out.vR.resize(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out.vR[i * n + j] = chosen.R(i, j);
    }
  }
  out.r_min_eig = chosen.r_min_eig;
  out.residual = (m0 * out.vR / chosen.lambda - out.vR).norm() / out.vR.norm();
  out.feasible = out.r_min_eig > 0.0 && out.residual <= kResidualTol;

  // Distance from the chosen eigenvalue to the rest of the spectrum; the
  // eigen-adjoint is only trustworthy for simple eigenvalues.
  for (int i = 0; i < shared->values.size(); ++i) {
    if (i == out.picked) continue;
    const double gap = std::abs(shared->values[i] - std::complex<double>(chosen.lambda, 0.0));
    out.eigen_gap = std::min(out.eigen_gap, gap);
  }
  return out;
}

RationalFactorCDE::RationalFactorCDE(BetaBasis phi, BetaBasis psi, Eigen::MatrixXd L,
                                     EigenvaluePick pick)
    : phi_(std::move(phi)), psi_(std::move(psi)), L_(std::move(L)),
      e_norm_(normalization_tensor(phi_, psi_)),
      norm_(solve_normalization(PsdFactor{L_}, e_norm_, pick)) {
  if (phi_.size() != psi_.size() || phi_.dim() != psi_.dim()) {
    throw std::invalid_argument("RationalFactorCDE: phi and psi must agree in n and d");
  }
  if (L_.rows() != phi_.size() || L_.cols() != phi_.size()) {
    throw std::invalid_argument("RationalFactorCDE: factor must be n x n");
  }
  if (norm_.feasible) {
    Eigen::LLT<Eigen::MatrixXd> llt(norm_.R);
    if (llt.info() == Eigen::Success) {
      r_chol_ = llt.matrixL();
    } else {
      norm_.feasible = false;  // PD by eigenvalue but not by Cholesky: borderline
    }
  }
}

Eigen::MatrixXd RationalFactorCDE::q() const {
  require_feasible();
  return L_.transpose() * L_ / norm_.scale_lambda;
}

void RationalFactorCDE::require_feasible() const {
  if (!norm_.feasible) {
    throw std::runtime_error("RationalFactorCDE: model is not feasible (no valid normalization)");
  }
}

double RationalFactorCDE::g(const Eigen::VectorXd& u) const {
  require_feasible();
  // ||chol(R)^T phi||^2: non-negative in floating point by construction.
  return (r_chol_.transpose() * phi_.eval(u)).squaredNorm();
}

double RationalFactorCDE::log_g(const Eigen::VectorXd& u) const {
  require_feasible();
  const Eigen::VectorXd lp = phi_.eval_log(u);
  const double mx = lp.maxCoeff();
  const Eigen::VectorXd scaled = (lp.array() - mx).exp();
  const double v = (r_chol_.transpose() * scaled).squaredNorm();
  if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
  return 2.0 * mx + std::log(v);
}

double RationalFactorCDE::eval_conditional(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& x_next) const {
  require_feasible();
  const Eigen::VectorXd z = phi_.eval(x).cwiseProduct(psi_.eval(x_next));
  const double f = (L_ * z).squaredNorm() / norm_.scale_lambda;
  return g(x_next) * f / g(x);
}

double RationalFactorCDE::log_conditional(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& x_next) const {
  require_feasible();
  const Eigen::VectorXd lz = phi_.eval_log(x) + psi_.eval_log(x_next);
  const double mz = lz.maxCoeff();
  const Eigen::VectorXd scaled = (lz.array() - mz).exp();
  const double f = (L_ * scaled).squaredNorm();
  if (!(f > 0.0)) return -std::numeric_limits<double>::infinity();
  const double log_f = 2.0 * mz + std::log(f) - std::log(norm_.scale_lambda);
  return log_g(x_next) + log_f - log_g(x);
}

int RationalFactorCDE::count_parameters() const {
  const int nn = n();
  const int dd = d();
  return nn * nn + nn * nn + 2 * nn * dd + 2 * nn * dd;
}

int count_initial_parameters(int n, int d) {
  return n * n + 2 * n * d;
}

nlohmann::json RationalFactorCDE::to_json() const {
  require_feasible();
  std::vector<double> l, r;
  const int nn = n();
  l.reserve(nn * nn);
  r.reserve(nn * nn);
  for (int i = 0; i < nn; ++i) {
    for (int j = 0; j < nn; ++j) {
      l.push_back(L_(i, j));
      r.push_back(norm_.R(i, j));
    }
  }
  return nlohmann::json{
      {"phi", phi_.to_json()},
      {"psi", psi_.to_json()},
      {"L", l},
      {"scale_lambda", norm_.scale_lambda},
      {"R", r},
      {"meta", {{"n", nn}, {"d", d()}, {"version", 1}}},
  };
}

RationalFactorCDE RationalFactorCDE::from_json(const nlohmann::json& j) {
  BetaBasis phi = BetaBasis::from_json(j.at("phi"));
  BetaBasis psi = BetaBasis::from_json(j.at("psi"));
  const int n = j.at("meta").at("n").get<int>();
  const int d = j.at("meta").at("d").get<int>();
  if (n != phi.size() || d != phi.dim()) {
    throw ValidationError("model file rejected: meta does not match bases");
  }
  const auto lv = j.at("L").get<std::vector<double>>();
  const auto rv = j.at("R").get<std::vector<double>>();
  if (static_cast<int>(lv.size()) != n * n || static_cast<int>(rv.size()) != n * n) {
    throw ValidationError("model file rejected: matrix size mismatch");
  }
  Eigen::MatrixXd L(n, n), stored_r(n, n);
  for (int i = 0; i < n; ++i) {
    for (int jj = 0; jj < n; ++jj) {
      L(i, jj) = lv[i * n + jj];
      stored_r(i, jj) = rv[i * n + jj];
    }
  }
  const double stored_lambda = j.at("scale_lambda").get<double>();

  RationalFactorCDE model(std::move(phi), std::move(psi), std::move(L));
  if (!model.feasible()) {
    throw ValidationError("model file rejected: normalization solve is infeasible");
  }
  // Verify the stored (lambda, R) against the fixed point directly; a corrupted
  // file must not be silently repaired by the re-solve.
  const int nn = model.n();
  Eigen::VectorXd v(nn * nn);
  for (int i = 0; i < nn; ++i) {
    for (int jj = 0; jj < nn; ++jj) {
      v[i * nn + jj] = stored_r(i, jj);
    }
  }
  const Eigen::MatrixXd q0 = model.L_.transpose() * model.L_;
  Eigen::VectorXd mv = model.e_norm_.matrix() * v;
  for (int i = 0; i < nn; ++i) {
    for (int jj = 0; jj < nn; ++jj) {
      mv[i * nn + jj] *= q0(i, jj) / stored_lambda;
    }
  }
  const double residual = (mv - v).norm() / v.norm();
  if (!(residual <= kResidualTol)) {
    throw ValidationError("model file rejected: normalization residual too large");
  }
  if (!(min_eigenvalue(0.5 * (stored_r + stored_r.transpose())) > 0.0)) {
    throw ValidationError("model file rejected: stored R is not positive definite");
  }
  return model;
}

}  // namespace sosmp
