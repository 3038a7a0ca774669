#include "sosmp/belief.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <nlohmann/json.hpp>

#include "sosmp/json_util.hpp"
#include <stdexcept>

#include "sosmp/special_functions.hpp"

namespace sosmp {

Belief::Belief(Eigen::MatrixXd g_coeff, BetaBasis g_basis, BetaBasis h_basis,
               Eigen::MatrixXd h_factor, int step, double log_z)
    : g_coeff_(std::move(g_coeff)), g_basis_(std::move(g_basis)), h_basis_(std::move(h_basis)),
      h_factor_(std::move(h_factor)), step_(step), log_z_(log_z) {
  if (h_factor_.cols() != h_basis_.size()) {
    throw std::invalid_argument("Belief: h factor columns must match the h basis size");
  }
  h_coeff_ = h_factor_.transpose() * h_factor_;
  Eigen::LLT<Eigen::MatrixXd> llt(g_coeff_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("Belief: g coefficients must be positive definite");
  }
  g_chol_ = llt.matrixL();
}

double Belief::eval(const Eigen::VectorXd& x) const {
  const double gv = (g_chol_.transpose() * g_basis_.eval(x)).squaredNorm();
  const double hv = (h_factor_ * h_basis_.eval(x)).squaredNorm();
  return gv * hv * std::exp(-log_z_);
}

double Belief::log_eval(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd lg = g_basis_.eval_log(x);
  const double mg = lg.maxCoeff();
  const double gv = (g_chol_.transpose() * (lg.array() - mg).exp().matrix()).squaredNorm();
  const Eigen::VectorXd lh = h_basis_.eval_log(x);
  const double mh = lh.maxCoeff();
  const double hv = (h_factor_ * (lh.array() - mh).exp().matrix()).squaredNorm();
  if (!(gv > 0.0) || !(hv > 0.0)) return -std::numeric_limits<double>::infinity();
  return 2.0 * mg + std::log(gv) + 2.0 * mh + std::log(hv) - log_z_;
}

Belief Belief::with_log_z(double log_z) const {
  return Belief(g_coeff_, g_basis_, h_basis_, h_factor_, step_, log_z);
}

Eigen::MatrixXd Belief::psd_factor_of(const Eigen::MatrixXd& h) {
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("Belief: eigen factorization of h failed");
  }
  const Eigen::VectorXd clipped = solver.eigenvalues().cwiseMax(0.0);
  return clipped.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

nlohmann::json Belief::to_json() const {
  std::vector<double> h;
  const int n = h_basis_.size();
  h.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      h.push_back(h_coeff_(i, j));
    }
  }
  return nlohmann::json{
      {"step", step_}, {"h_basis", h_basis_.to_json()}, {"H", h}, {"log_Z", log_z_}};
}

Belief Belief::from_json(const nlohmann::json& j, const RationalFactorCDE& model) {
  BetaBasis h_basis = BetaBasis::from_json(j.at("h_basis"));
  const int n = h_basis.size();
  const auto hv = j.at("H").get<std::vector<double>>();
  if (static_cast<int>(hv.size()) != n * n) {
    throw ValidationError("belief file rejected: H size mismatch");
  }
  Eigen::MatrixXd h(n, n);
  for (int i = 0; i < n; ++i) {
    for (int jj = 0; jj < n; ++jj) {
      h(i, jj) = hv[i * n + jj];
    }
  }
  return Belief(model.r(), model.phi(), std::move(h_basis), psd_factor_of(h),
                j.at("step").get<int>(), j.at("log_Z").get<double>());
}

PropagationEngine::PropagationEngine(RationalFactorCDE model) : model_(std::move(model)) {
  if (!model_.feasible()) {
    throw std::runtime_error("PropagationEngine: model must be feasible");
  }
}

const CrossMomentTensor& PropagationEngine::tensor_for(const BetaBasis& h_basis) const {
  for (const auto& [basis, tensor] : tensor_cache_) {
    if (basis.same_shape_as(h_basis)) return tensor;
  }
  tensor_cache_.emplace_back(h_basis,
                             cross_moment_tensor(model_.phi(), h_basis, "phi", "h"));
  return tensor_cache_.back().second;
}

Belief PropagationEngine::initial_belief(const BetaBasis& chi, const Eigen::MatrixXd& l0) const {
  Belief raw(model_.r(), model_.phi(), chi, l0, 0, 0.0);
  return normalized(raw);
}

double PropagationEngine::integrate_belief(const Belief& b) const {
  if (!b.g_basis().same_shape_as(model_.phi())) {
    throw std::invalid_argument("integrate_belief: belief does not share the model's phi basis");
  }
  const CrossMomentTensor& e = tensor_for(b.h_basis());
  const int n = model_.n();
  Eigen::VectorXd vr(n * n), vh(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      vr[i * n + j] = b.g_coeff()(i, j);
      vh[i * n + j] = b.h()(i, j);
    }
  }
  return vr.dot(e.matrix() * vh) * std::exp(-b.log_z());
}

Belief PropagationEngine::normalized(const Belief& b) const {
  const double mass = integrate_belief(b);
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw std::runtime_error("normalize: belief has non-positive or non-finite mass");
  }
  const double scale = std::exp(-0.5 * b.log_z()) / std::sqrt(mass);
  return Belief(b.g_coeff(), b.g_basis(), b.h_basis(), b.h_factor() * scale, b.step(), 0.0);
}

PropagationResult PropagationEngine::propagate(const Belief& b) const {
  const CrossMomentTensor& e = tensor_for(b.h_basis());
  const int n = model_.n();
  Eigen::VectorXd vh(n * n);
  const double z = std::exp(-b.log_z());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      vh[i * n + j] = b.h()(i, j) * z;
    }
  }
  const Eigen::VectorXd c = e.matrix() * vh;  // c_ij = <phi_i phi_j, h_k>
  const Eigen::MatrixXd q = model_.q();
  Eigen::MatrixXd h_next(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      h_next(i, j) = q(i, j) * c[i * n + j];
    }
  }
  Belief next(b.g_coeff(), b.g_basis(), model_.psi(), Belief::psd_factor_of(h_next),
              b.step() + 1, 0.0);
  const double mass = integrate_belief(next);
  PropagationResult result{next, mass, false};
  if (std::abs(mass - 1.0) > kMassDriftTol) {
    std::cerr << "[sosmp] warning: belief mass drifted to " << mass << " at step "
              << next.step() << ", renormalizing\n";
    result.belief = normalized(next);
    result.renormalized = true;
  }
  return result;
}

Eigen::MatrixXd PropagationEngine::marginal_grid(const Belief& b, int dim_a, int dim_b,
                                                 int m) const {
  Eigen::VectorXd grid(m);
  for (int t = 0; t < m; ++t) {
    grid[t] = (t + 0.5) / m;
  }
  return marginal_grid(b, dim_a, dim_b, grid, grid);
}

Eigen::MatrixXd PropagationEngine::marginal_grid(const Belief& b, int dim_a, int dim_b,
                                                 const Eigen::VectorXd& grid_a,
                                                 const Eigen::VectorXd& grid_b) const {
  const int d = model_.d();
  if (d < 2 || dim_a < 0 || dim_b < 0 || dim_a >= d || dim_b >= d || dim_a == dim_b) {
    throw std::invalid_argument("marginal_grid: invalid dimension pair");
  }
  const int n = model_.n();
  const BetaBasis& phi = b.g_basis();
  const BetaBasis& hb = b.h_basis();

  // W[(ij),(kl)] = R_ij H_kl exp(-log_Z) * closed-form integral over the
  // marginalized dimensions of the four-kernel product.
  Eigen::MatrixXd w(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ExponentVector gp = phi.pair_exponents(i, j);
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const ExponentVector hp = hb.pair_exponents(k, l);
          double log_c = 0.0;
          for (int mm = 0; mm < d; ++mm) {
            if (mm == dim_a || mm == dim_b) continue;
            log_c += log_beta(gp.a[mm] + hp.a[mm] + 1.0, gp.b[mm] + hp.b[mm] + 1.0);
          }
          w(i * n + j, k * n + l) =
              b.g_coeff()(i, j) * b.h()(k, l) * std::exp(log_c - b.log_z());
        }
      }
    }
  }

  // In-plane kernel factors per basis function.
  auto in_plane = [&](const BetaBasis& basis, double ua, double ub) {
    Eigen::VectorXd v(basis.size());
    for (int i = 0; i < basis.size(); ++i) {
      v[i] = std::exp((basis.alpha()(i, dim_a) - 1.0) * std::log(ua) +
                      (basis.beta()(i, dim_a) - 1.0) * std::log1p(-ua) +
                      (basis.alpha()(i, dim_b) - 1.0) * std::log(ub) +
                      (basis.beta()(i, dim_b) - 1.0) * std::log1p(-ub));
    }
    return v;
  };

  Eigen::MatrixXd out(grid_a.size(), grid_b.size());
  Eigen::VectorXd ss(n * n);
  for (Eigen::Index ta = 0; ta < grid_a.size(); ++ta) {
    for (Eigen::Index tb = 0; tb < grid_b.size(); ++tb) {
      const double ua = grid_a[ta];
      const double ub = grid_b[tb];
      if (!(ua > 0.0 && ua < 1.0 && ub > 0.0 && ub < 1.0)) {
        throw std::domain_error("marginal_grid: grid points must be interior");
      }
      const Eigen::VectorXd p = in_plane(phi, ua, ub);
      const Eigen::VectorXd s = in_plane(hb, ua, ub);
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          ss[k * n + l] = s[k] * s[l];
        }
      }
      const Eigen::VectorXd a = w * ss;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          acc += p[i] * p[j] * a[i * n + j];
        }
      }
      out(ta, tb) = acc;
    }
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> PropagationEngine::moments(const Belief& b) const {
  const int n = model_.n();
  const int d = model_.d();
  const BetaBasis& phi = b.g_basis();
  const BetaBasis& hb = b.h_basis();
  const CrossMomentTensor& e = tensor_for(b.h_basis());
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(d);
  const double z = std::exp(-b.log_z());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ExponentVector gp = phi.pair_exponents(i, j);
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const ExponentVector hp = hb.pair_exponents(k, l);
          const double wgt = b.g_coeff()(i, j) * b.h()(k, l) * z * e.at(i, j, k, l);
          for (int mm = 0; mm < d; ++mm) {
            const double a = gp.a[mm] + hp.a[mm];
            const double bb = gp.b[mm] + hp.b[mm];
            // B(a+2,b+1)/B(a+1,b+1) and B(a+3,b+1)/B(a+1,b+1).
            const double f1 = (a + 1.0) / (a + bb + 2.0);
            const double f2 = f1 * (a + 2.0) / (a + bb + 3.0);
            m1[mm] += wgt * f1;
            m2[mm] += wgt * f2;
          }
        }
      }
    }
  }
  return {m1, (m2 - m1.cwiseProduct(m1)).eval()};
}

}  // namespace sosmp
