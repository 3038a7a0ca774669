#include "sosmp/training.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "sosmp/json_util.hpp"
#include "sosmp/rng.hpp"
#include "sosmp/special_functions.hpp"

namespace sosmp {

namespace {

constexpr std::uint64_t kSplitStream = 0x51e554a7;
constexpr std::uint64_t kInitStream = 0x1a17b0b5;
constexpr std::uint64_t kEpochStreamBase = 0xe90c0000;

double sanitize_mean(double sum, int count) {
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

// Scaled quadratic form u^T M u with u = exp(log_u - max): returns the scaled
// value and the scaled vector; the common factor exp(2 max) is reported as a
// log offset.
struct ScaledForm {
  Eigen::VectorXd u;
  double value;       // u^T M u, order ~1 when the form is healthy
  double log_offset;  // 2 * max(log_u)
};

ScaledForm scaled_form(const Eigen::VectorXd& log_u, const Eigen::MatrixXd& m) {
  ScaledForm out;
  const double mx = log_u.maxCoeff();
  out.u = (log_u.array() - mx).exp();
  out.value = out.u.dot(m * out.u);
  out.log_offset = 2.0 * mx;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter packing

Eigen::VectorXd CdeParams::pack() const {
  const int nn = n();
  const int dd = d();
  Eigen::VectorXd v(packed_size());
  int at = 0;
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) v[at++] = L(i, j);
  auto put = [&](const Eigen::MatrixXd& m) {
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < dd; ++j) v[at++] = m(i, j);
  };
  put(phi_alpha);
  put(phi_beta);
  put(psi_alpha);
  put(psi_beta);
  return v;
}

CdeParams CdeParams::unpack(const Eigen::VectorXd& v, int n, int d,
                            std::optional<int> phi_frozen) {
  CdeParams p;
  p.phi_frozen = phi_frozen;
  p.L.resize(n, n);
  int at = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.L(i, j) = v[at++];
  auto take = [&](Eigen::MatrixXd& m) {
    m.resize(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = v[at++];
  };
  take(p.phi_alpha);
  take(p.phi_beta);
  take(p.psi_alpha);
  take(p.psi_beta);
  return p;
}

void CdeParams::clamp_shapes(double alpha_min, double alpha_max) {
  auto clamp = [&](Eigen::MatrixXd& m) {
    m = m.cwiseMax(alpha_min).cwiseMin(alpha_max);
  };
  clamp(phi_alpha);
  clamp(phi_beta);
  clamp(psi_alpha);
  clamp(psi_beta);
  if (phi_frozen) {
    phi_alpha.row(*phi_frozen).setOnes();
    phi_beta.row(*phi_frozen).setOnes();
  }
}

Eigen::VectorXd InitialParams::pack() const {
  const int nn = n();
  const int dd = d();
  Eigen::VectorXd v(nn * nn + 2 * nn * dd);
  int at = 0;
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) v[at++] = L0(i, j);
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < dd; ++j) v[at++] = chi_alpha(i, j);
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < dd; ++j) v[at++] = chi_beta(i, j);
  return v;
}

InitialParams InitialParams::unpack(const Eigen::VectorXd& v, int n, int d,
                                    std::optional<int> frozen) {
  InitialParams p;
  p.chi_frozen = frozen;
  p.L0.resize(n, n);
  int at = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.L0(i, j) = v[at++];
  p.chi_alpha.resize(n, d);
  p.chi_beta.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) p.chi_alpha(i, j) = v[at++];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) p.chi_beta(i, j) = v[at++];
  return p;
}

// ---------------------------------------------------------------------------
// Loss

namespace {

double shape_regularization(const CdeParams& p, double c_reg) {
  double acc = 0.0;
  for (int i = 0; i < p.n(); ++i) {
    const bool frozen = p.phi_frozen && *p.phi_frozen == i;
    for (int m = 0; m < p.d(); ++m) {
      if (!frozen) {
        acc += p.phi_alpha(i, m) * p.phi_alpha(i, m) + p.phi_beta(i, m) * p.phi_beta(i, m);
      }
      acc += p.psi_alpha(i, m) * p.psi_alpha(i, m) + p.psi_beta(i, m) * p.psi_beta(i, m);
    }
  }
  return c_reg * acc;
}

// Penalty of the infeasible branch when an R candidate exists: squared hinge
// on the eigenvalues of R below the margin. R is symmetrized upstream so the
// imaginary term of the published penalty is identically zero here; it is kept
// only for the candidate-free branch below.
double r_eigenvalue_penalty(const Eigen::VectorXd& r_eigs, double w_pen, double eps) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < r_eigs.size(); ++i) {
    const double h = std::max(-r_eigs[i] + eps, 0.0);
    acc += h * h;
  }
  return w_pen * acc;
}

// When no positive real eigenvalue exists, penalize the best candidate: the
// eigenvalue closest to being positive real.
int best_complex_candidate(const Eigen::VectorXcd& values) {
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < values.size(); ++i) {
    const double score = values[i].real() - std::abs(values[i].imag());
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

double no_candidate_penalty(const Eigen::VectorXcd& values, double w_pen, double eps) {
  const int j = best_complex_candidate(values);
  const double hinge = std::max(-values[j].real() + eps, 0.0);
  const double h = hinge + std::abs(values[j].imag());
  return w_pen * h * h;
}

}  // namespace

CdeLoss cde_loss(const CdeParams& params, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& xps,
                 const TrainConfig& cfg) {
  if (xs.rows() != xps.rows() || xs.rows() < 1) {
    throw std::invalid_argument("cde_loss: batch must be nonempty and paired");
  }
  CdeLoss out;
  const BetaBasis phi = params.phi();
  const BetaBasis psi = params.psi();
  const CrossMomentTensor e_norm = normalization_tensor(phi, psi);
  out.norm = solve_normalization(PsdFactor{params.L}, e_norm, cfg.pick);
  out.reg = shape_regularization(params, cfg.c_reg);

  if (!out.norm.has_positive_real) {
    if (!out.norm.eigen) {
      throw std::runtime_error("cde_loss: eigen solver failed; aborting step");
    }
    out.penalty = no_candidate_penalty(out.norm.eigen->values, cfg.w_pen, cfg.epsilon);
    out.value = out.penalty + out.reg;
    out.feasible = false;
    return out;
  }
  if (!out.norm.feasible) {
    const Eigen::VectorXd r_eigs = symmetric_eigen(out.norm.R).values;
    out.penalty = r_eigenvalue_penalty(r_eigs, cfg.w_pen, cfg.epsilon);
    out.value = out.penalty + out.reg;
    out.feasible = false;
    return out;
  }

  out.feasible = true;
  const Eigen::MatrixXd q = params.L.transpose() * params.L / out.norm.scale_lambda;
  const Eigen::MatrixXd& r = out.norm.R;
  const int count_total = static_cast<int>(xs.rows());
  double nll_sum = 0.0;
  int counted = 0;
  for (int s = 0; s < count_total; ++s) {
    const Eigen::VectorXd x = xs.row(s).transpose();
    const Eigen::VectorXd xn = xps.row(s).transpose();
    const ScaledForm gx = scaled_form(phi.eval_log(x), r);
    const ScaledForm gxn = scaled_form(phi.eval_log(xn), r);
    const ScaledForm f = scaled_form(phi.eval_log(x) + psi.eval_log(xn), q);
    if (!(gx.value > 0.0) || !(gxn.value > 0.0) || !(f.value > 0.0)) {
      ++out.skipped;
      continue;
    }
    const double log_p = (gxn.log_offset + std::log(gxn.value)) +
                         (f.log_offset + std::log(f.value)) -
                         (gx.log_offset + std::log(gx.value));
    nll_sum -= log_p;
    ++counted;
  }
  out.nll = sanitize_mean(nll_sum, counted);
  const auto ld = log_det_pd(r);
  if (!ld) {
    // PD by eigenvalue but Cholesky disagreed: treat as the penalty branch.
    out.feasible = false;
    const Eigen::VectorXd r_eigs = symmetric_eigen(r).values;
    out.penalty = r_eigenvalue_penalty(r_eigs, cfg.w_pen, cfg.epsilon);
    out.value = out.penalty + out.reg;
    return out;
  }
  out.barrier = -cfg.w_barrier * *ld;
  out.value = (counted > 0 ? out.nll : 0.0) + out.barrier + out.reg;
  return out;
}

// ---------------------------------------------------------------------------
// Analytic adjoint

namespace {

// Backward pass of the eigenvector -> R normalization chain:
// R = n * S / ||S||, S = sign * sym(unvec(v)). Returns vbar.
Eigen::VectorXd normalization_chain_backward(const Eigen::MatrixXd& rbar,
                                             const Eigen::VectorXd& v, double sign, int n) {
  Eigen::MatrixXd raw(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) raw(i, j) = v[i * n + j];
  const Eigen::MatrixXd s = sign * 0.5 * (raw + raw.transpose());
  const double f = s.norm();
  const Eigen::MatrixXd rbar_sym = 0.5 * (rbar + rbar.transpose());
  const double dot = (rbar_sym.array() * s.array()).sum();
  const Eigen::MatrixXd sbar = (n / f) * (rbar_sym - (dot / (f * f)) * s);
  Eigen::VectorXd vbar(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) vbar[i * n + j] = sign * sbar(i, j);
  // The chain is invariant to scaling of v; the component along v is zero up
  // to rounding, project it out anyway.
  vbar -= (vbar.dot(v) / v.squaredNorm()) * v;
  return vbar;
}

// Adjoint of a simple real eigenpair (lambda, v) of a general real matrix M:
// given lambda_bar and vbar (gradient w.r.t. the eigenvector; its component
// along v is irrelevant by scale invariance), returns M_bar.
//
// Solves the perturbation system (M - lambda I) dv = -dM v + dlambda v through
// the pseudo-inverse of K = M - lambda I. The second-smallest singular value
// of K measures how isolated the eigenpair is for a possibly non-normal M;
// when its ratio to the largest drops below sigma_ratio_min the eigenvector
// derivative is numerically meaningless and the step must use finite
// differences instead (signalled by an empty result).
struct EigenpairBackward {
  Eigen::MatrixXd m0bar;
  double sigma_ratio = 0.0;
  bool well_conditioned = false;
};

EigenpairBackward eigenpair_backward(const Eigen::MatrixXd& m, double lambda,
                                     const Eigen::VectorXd& v, double lambda_bar,
                                     const Eigen::VectorXd& vbar, double sigma_ratio_min) {
  EigenpairBackward out;
  const Eigen::Index nn = m.rows();
  const Eigen::MatrixXd k = m - lambda * Eigen::MatrixXd::Identity(nn, nn);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (!(sigma[0] > 0.0)) {
    return out;
  }
  out.sigma_ratio = nn > 1 ? sigma[nn - 2] / sigma[0] : 1.0;
  if (out.sigma_ratio <= sigma_ratio_min) {
    return out;
  }
  out.well_conditioned = true;
  // Left eigenvector: null direction of K^T.
  const Eigen::VectorXd w = svd.matrixU().col(nn - 1);
  // u = (K^T)^+ vbar with the null direction truncated.
  Eigen::VectorXd scaled = svd.matrixV().transpose() * vbar;
  for (Eigen::Index i = 0; i < nn; ++i) {
    scaled[i] = sigma[i] > sigma_ratio_min * sigma[0] ? scaled[i] / sigma[i] : 0.0;
  }
  const Eigen::VectorXd u = svd.matrixU() * scaled;
  const double wv = w.dot(v);
  out.m0bar =
      ((lambda_bar + u.dot(v)) / wv) * (w * v.transpose()) - u * v.transpose();
  return out;
}

// d(sum Wbar o E)/d(shapes) for a cross-moment tensor E(left, right); grads
// accumulate into the callers' matrices. The derivative of each entry w.r.t. a
// shape parameter is entry * (digamma difference) of the summed exponents.
void accumulate_cross_tensor_shape_grad(const BetaBasis& left, const BetaBasis& right,
                                        const Eigen::MatrixXd& entries,
                                        const Eigen::MatrixXd& wbar,
                                        Eigen::MatrixXd& left_alpha_bar,
                                        Eigen::MatrixXd& left_beta_bar,
                                        Eigen::MatrixXd& right_alpha_bar,
                                        Eigen::MatrixXd& right_beta_bar) {
  const int n = left.size();
  const int d = left.dim();
  // Pair exponent sums per basis.
  std::vector<Eigen::VectorXd> la(n * n), lb(n * n), ra(n * n), rb(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const ExponentVector pl = left.pair_exponents(i, j);
      const ExponentVector pr = right.pair_exponents(i, j);
      la[i * n + j] = pl.a;
      lb[i * n + j] = pl.b;
      ra[i * n + j] = pr.a;
      rb[i * n + j] = pr.b;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int ij = std::min(i, j) * n + std::max(i, j);
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const double wb = wbar(i * n + j, k * n + l);
          if (wb == 0.0) continue;
          const int kl = std::min(k, l) * n + std::max(k, l);
          const double e = entries(i * n + j, k * n + l);
          const double we = wb * e;
          for (int m = 0; m < d; ++m) {
            const double a = la[ij][m] + ra[kl][m];
            const double b = lb[ij][m] + rb[kl][m];
            const double dab = digamma(a + b + 2.0);
            const double da = digamma(a + 1.0) - dab;
            const double db = digamma(b + 1.0) - dab;
            left_alpha_bar(i, m) += we * da;
            left_alpha_bar(j, m) += we * da;
            left_beta_bar(i, m) += we * db;
            left_beta_bar(j, m) += we * db;
            right_alpha_bar(k, m) += we * da;
            right_alpha_bar(l, m) += we * da;
            right_beta_bar(k, m) += we * db;
            right_beta_bar(l, m) += we * db;
          }
        }
      }
    }
  }
}

struct CdeShapeGrads {
  Eigen::MatrixXd phi_alpha, phi_beta, psi_alpha, psi_beta;

  explicit CdeShapeGrads(int n, int d)
      : phi_alpha(Eigen::MatrixXd::Zero(n, d)), phi_beta(Eigen::MatrixXd::Zero(n, d)),
        psi_alpha(Eigen::MatrixXd::Zero(n, d)), psi_beta(Eigen::MatrixXd::Zero(n, d)) {}
};

// Empty result means the eigenvector adjoint is not trustworthy here (no
// usable candidate, or a near-degenerate eigenpair) and the caller must fall
// back to finite differences.
std::optional<CdeGradient> cde_grad_analytic(const CdeParams& params, const Eigen::MatrixXd& xs,
                                             const Eigen::MatrixXd& xps, const TrainConfig& cfg) {
  CdeGradient out;
  out.loss = cde_loss(params, xs, xps, cfg);
  const int n = params.n();
  const int d = params.d();
  const BetaBasis phi = params.phi();
  const BetaBasis psi = params.psi();
  const NormalizationSolution& sol = out.loss.norm;
  if (!sol.has_positive_real) {
    return std::nullopt;  // eigenvalue-only penalty on a degenerate spectrum
  }

  Eigen::MatrixXd lbar = Eigen::MatrixXd::Zero(n, n);
  CdeShapeGrads shapes(n, d);
  Eigen::MatrixXd q0bar = Eigen::MatrixXd::Zero(n, n);

  // Adjoints feeding the normalization solve.
  Eigen::MatrixXd rbar = Eigen::MatrixXd::Zero(n, n);
  double lambda_bar = 0.0;
  Eigen::MatrixXd m0bar = Eigen::MatrixXd::Zero(n * n, n * n);

  const Eigen::MatrixXd q0 = params.L.transpose() * params.L;
  const CrossMomentTensor e_norm = normalization_tensor(phi, psi);
  const Eigen::MatrixXd& t = e_norm.matrix();

  if (!sol.feasible) {
    const SymmetricEigen se = symmetric_eigen(sol.R);
    for (int i = 0; i < n; ++i) {
      const double h = std::max(-se.values[i] + cfg.epsilon, 0.0);
      if (h > 0.0) {
        rbar -= cfg.w_pen * 2.0 * h * se.vectors.col(i) * se.vectors.col(i).transpose();
      }
    }
  } else {
    // Feasible branch: NLL + barrier.
    const double lambda = sol.scale_lambda;
    const Eigen::MatrixXd q = q0 / lambda;
    const Eigen::MatrixXd& r = sol.R;
    Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(n, n);
    int counted = 0;
    for (int s = 0; s < xs.rows(); ++s) {
      const Eigen::VectorXd x = xs.row(s).transpose();
      const Eigen::VectorXd xn = xps.row(s).transpose();
      const Eigen::VectorXd lpx = phi.eval_log(x);
      const Eigen::VectorXd lpxn = phi.eval_log(xn);
      const Eigen::VectorXd lsxn = psi.eval_log(xn);
      const ScaledForm gx = scaled_form(lpx, r);
      const ScaledForm gxn = scaled_form(lpxn, r);
      const ScaledForm f = scaled_form(lpx + lsxn, q);
      if (!(gx.value > 0.0) || !(gxn.value > 0.0) || !(f.value > 0.0)) continue;
      ++counted;
    }
    const double inv_cnt = counted > 0 ? 1.0 / counted : 0.0;
    for (int s = 0; s < xs.rows(); ++s) {
      const Eigen::VectorXd x = xs.row(s).transpose();
      const Eigen::VectorXd xn = xps.row(s).transpose();
      const Eigen::VectorXd lpx = phi.eval_log(x);
      const Eigen::VectorXd lpxn = phi.eval_log(xn);
      const Eigen::VectorXd lsxn = psi.eval_log(xn);
      const ScaledForm gx = scaled_form(lpx, r);
      const ScaledForm gxn = scaled_form(lpxn, r);
      const ScaledForm f = scaled_form(lpx + lsxn, q);
      if (!(gx.value > 0.0) || !(gxn.value > 0.0) || !(f.value > 0.0)) continue;
      // d(-log p)/dR and /dQ
      rbar += inv_cnt * (gx.u * gx.u.transpose() / gx.value -
                         gxn.u * gxn.u.transpose() / gxn.value);
      qbar -= inv_cnt * (f.u * f.u.transpose() / f.value);
      // Direct shape terms through the kernel evaluations.
      const Eigen::VectorXd rgx = 2.0 * (r * gx.u);
      const Eigen::VectorXd rgxn = 2.0 * (r * gxn.u);
      const Eigen::VectorXd qf = 2.0 * (q * f.u);
      for (int i = 0; i < n; ++i) {
        const double cgx = rgx[i] * gx.u[i] / gx.value;     // dlog gx / d(log phi_i(x))
        const double cgxn = rgxn[i] * gxn.u[i] / gxn.value;
        const double cf = qf[i] * f.u[i] / f.value;         // dlog f / d(log z_i)
        for (int m = 0; m < d; ++m) {
          const double lx = std::log(x[m]);
          const double l1x = std::log1p(-x[m]);
          const double lxn = std::log(xn[m]);
          const double l1xn = std::log1p(-xn[m]);
          // d(-log p) = -(dlog gxn + dlog f - dlog gx)
          shapes.phi_alpha(i, m) -= inv_cnt * (cgxn * lxn + cf * lx - cgx * lx);
          shapes.phi_beta(i, m) -= inv_cnt * (cgxn * l1xn + cf * l1x - cgx * l1x);
          shapes.psi_alpha(i, m) -= inv_cnt * (cf * lxn);
          shapes.psi_beta(i, m) -= inv_cnt * (cf * l1xn);
        }
      }
    }
    // Barrier: d(-w log det R)/dR = -w R^{-1}.
    rbar -= cfg.w_barrier * Eigen::LLT<Eigen::MatrixXd>(r).solve(Eigen::MatrixXd::Identity(n, n));
    // Q = Q0 / lambda.
    q0bar += qbar / lambda;
    lambda_bar -= (qbar.array() * q0.array()).sum() / (lambda * lambda);
  }

  // Backward through the normalization solve.
  {
    const Eigen::VectorXd v = sol.eigen->vectors.col(sol.picked).real();
    const Eigen::VectorXd vbar = normalization_chain_backward(rbar, v, sol.sign, n);
    Eigen::MatrixXd m0 = t;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        m0.row(i * n + j) *= q0(i, j);
      }
    }
    const EigenpairBackward eb =
        eigenpair_backward(m0, sol.scale_lambda, v, lambda_bar, vbar, cfg.fd_gap_threshold);
    if (!eb.well_conditioned) {
      return std::nullopt;
    }
    m0bar = eb.m0bar;
  }

  // M0[(ij),(kl)] = Q0(i,j) * T[(ij),(kl)] with T the normalization tensor.
  Eigen::MatrixXd tbar(n * n, n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = i * n + j;
      q0bar(i, j) += m0bar.row(row).dot(t.row(row));
      tbar.row(row) = q0(i, j) * m0bar.row(row);
    }
  }
  lbar += params.L * (q0bar + q0bar.transpose());

  // T rows pair psi, columns pair phi.
  accumulate_cross_tensor_shape_grad(psi, phi, t, tbar, shapes.psi_alpha, shapes.psi_beta,
                                     shapes.phi_alpha, shapes.phi_beta);

  // Regularization on trainable shape rows.
  for (int i = 0; i < n; ++i) {
    const bool frozen = params.phi_frozen && *params.phi_frozen == i;
    for (int m = 0; m < d; ++m) {
      if (!frozen) {
        shapes.phi_alpha(i, m) += 2.0 * cfg.c_reg * params.phi_alpha(i, m);
        shapes.phi_beta(i, m) += 2.0 * cfg.c_reg * params.phi_beta(i, m);
      }
      shapes.psi_alpha(i, m) += 2.0 * cfg.c_reg * params.psi_alpha(i, m);
      shapes.psi_beta(i, m) += 2.0 * cfg.c_reg * params.psi_beta(i, m);
    }
  }
  if (params.phi_frozen) {
    shapes.phi_alpha.row(*params.phi_frozen).setZero();
    shapes.phi_beta.row(*params.phi_frozen).setZero();
  }

  CdeParams g;
  g.L = lbar;
  g.phi_alpha = shapes.phi_alpha;
  g.phi_beta = shapes.phi_beta;
  g.psi_alpha = shapes.psi_alpha;
  g.psi_beta = shapes.psi_beta;
  g.phi_frozen = params.phi_frozen;
  out.grad = g.pack();
  return out;
}

CdeGradient cde_grad_fd(const CdeParams& params, const Eigen::MatrixXd& xs,
                        const Eigen::MatrixXd& xps, const TrainConfig& cfg) {
  CdeGradient out;
  out.loss = cde_loss(params, xs, xps, cfg);
  out.used_fd = true;
  Eigen::VectorXd theta = params.pack();
  out.grad.resize(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = 1e-5 * (1.0 + std::abs(theta[k]));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double lp = cde_loss(CdeParams::unpack(tp, params.n(), params.d(), params.phi_frozen),
                               xs, xps, cfg).value;
    const double lm = cde_loss(CdeParams::unpack(tm, params.n(), params.d(), params.phi_frozen),
                               xs, xps, cfg).value;
    out.grad[k] = (lp - lm) / (2.0 * h);
  }
  return out;
}

}  // namespace

CdeGradient cde_loss_grad(const CdeParams& params, const Eigen::MatrixXd& xs,
                          const Eigen::MatrixXd& xps, const TrainConfig& cfg, GradMode mode) {
  if (mode == GradMode::kFiniteDifference) {
    return cde_grad_fd(params, xs, xps, cfg);
  }
  if (std::optional<CdeGradient> analytic = cde_grad_analytic(params, xs, xps, cfg)) {
    return *analytic;
  }
  return cde_grad_fd(params, xs, xps, cfg);
}

// ---------------------------------------------------------------------------
// Optimizers

AdamOptimizer::AdamOptimizer(int size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  params -= lr_ * (m_ / c1).cwiseQuotient(((v_ / c2).cwiseSqrt().array() + eps_).matrix());
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

std::vector<int> shuffled_indices(int count, std::uint64_t seed, std::uint64_t stream) {
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = i;
  RngStream rs(seed, stream);
  for (int i = count - 1; i > 0; --i) {
    const int j = static_cast<int>(rs.next_uint(i + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& idx, int from,
                            int to) {
  Eigen::MatrixXd out(to - from, m.cols());
  for (int i = from; i < to; ++i) out.row(i - from) = m.row(idx[i]);
  return out;
}

Eigen::MatrixXd log_uniform_shapes(int n, int d, RngStream& rs, double lo, double hi) {
  Eigen::MatrixXd m(n, d);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = std::exp(llo + (lhi - llo) * rs.next_u01());
  return m;
}

}  // namespace

std::pair<RationalFactorCDE, TrainReport> train_cde(const Eigen::MatrixXd& transitions,
                                                    const TrainConfig& cfg) {
  if (transitions.cols() % 2 != 0 || transitions.cols() < 2) {
    throw std::invalid_argument("train_cde: transition matrix must have 2d columns");
  }
  const int d = static_cast<int>(transitions.cols()) / 2;
  const int n = cfg.n_basis;
  const int total = static_cast<int>(transitions.rows());
  if (total < 4) throw std::invalid_argument("train_cde: need at least 4 transition pairs");

  const std::vector<int> order = shuffled_indices(total, cfg.seed, kSplitStream);
  const int n_val = std::min(total - 1, std::max(0, static_cast<int>(std::lround(
                                             cfg.val_fraction * total))));
  const int n_train = total - n_val;
  const Eigen::MatrixXd train_x = gather_rows(transitions.leftCols(d), order, 0, n_train);
  const Eigen::MatrixXd train_xp = gather_rows(transitions.rightCols(d), order, 0, n_train);
  const Eigen::MatrixXd val_x = gather_rows(transitions.leftCols(d), order, n_train, total);
  const Eigen::MatrixXd val_xp = gather_rows(transitions.rightCols(d), order, n_train, total);

  // Initialization: log-uniform shapes, factor scaled so the initial fixed
  // point matrix has spectral radius near 1.
  RngStream rs(cfg.seed, kInitStream);
  CdeParams params;
  params.phi_frozen = 0;
  params.phi_alpha = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  params.phi_beta = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  params.psi_alpha = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  params.psi_beta = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  params.clamp_shapes(cfg.alpha_min, cfg.alpha_max);
  {
    const CrossMomentTensor e0 = normalization_tensor(params.phi(), params.psi());
    const double mean_row_sum = e0.matrix().rowwise().sum().mean();
    const double scale = 1.0 / std::sqrt(std::max(n * mean_row_sum, 1e-12));
    params.L = scale * Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) params.L(i, j) += 0.01 * scale * rs.next_normal();
  }

  Eigen::VectorXd theta = params.pack();
  AdamOptimizer adam(static_cast<int>(theta.size()), cfg.learning_rate);
  TrainReport report;
  Eigen::VectorXd best_theta;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> idx = shuffled_indices(n_train, cfg.seed, kEpochStreamBase + epoch);
    int feasible_steps = 0, steps = 0;
    bool aborted = false;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int stop = std::min(n_train, start + cfg.batch_size);
      Eigen::MatrixXd bx(stop - start, d), bxp(stop - start, d);
      for (int i = start; i < stop; ++i) {
        bx.row(i - start) = train_x.row(idx[i]);
        bxp.row(i - start) = train_xp.row(idx[i]);
      }
      CdeParams cur = CdeParams::unpack(theta, n, d, params.phi_frozen);
      const CdeGradient g = cde_loss_grad(cur, bx, bxp, cfg, cfg.grad_mode);
      ++steps;
      if (g.used_fd) ++report.fd_fallbacks;
      if (g.loss.feasible) {
        ++feasible_steps;
      } else {
        ++report.infeasible_steps;
      }
      report.skipped_samples += g.loss.skipped;
      if (!std::isfinite(g.loss.value) || !g.grad.allFinite()) {
        aborted = true;  // abort the epoch, leave parameters untouched
        break;
      }
      if (cfg.optimizer == OptimizerKind::kAdam) {
        adam.step(theta, g.grad);
      } else {
        theta -= cfg.learning_rate * g.grad;
      }
      CdeParams stepped = CdeParams::unpack(theta, n, d, params.phi_frozen);
      stepped.clamp_shapes(cfg.alpha_min, cfg.alpha_max);
      theta = stepped.pack();
    }

    // End-of-epoch evaluation on the full splits.
    const CdeParams cur = CdeParams::unpack(theta, n, d, params.phi_frozen);
    const CdeLoss train_eval = cde_loss(cur, train_x, train_xp, cfg);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_nll = train_eval.feasible ? train_eval.nll
                                          : std::numeric_limits<double>::quiet_NaN();
    stats.residual = train_eval.norm.residual;
    stats.r_min_eig = train_eval.norm.r_min_eig;
    stats.feasible_fraction = steps > 0 ? static_cast<double>(feasible_steps) / steps : 0.0;
    if (n_val > 0 && train_eval.feasible) {
      const CdeLoss val_eval = cde_loss(cur, val_x, val_xp, cfg);
      stats.val_nll = val_eval.feasible ? val_eval.nll
                                        : std::numeric_limits<double>::quiet_NaN();
    } else if (train_eval.feasible) {
      stats.val_nll = stats.train_nll;
    } else {
      stats.val_nll = std::numeric_limits<double>::quiet_NaN();
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(stats);
    if (aborted) {
      break;
    }
    if (train_eval.feasible && std::isfinite(stats.val_nll) && stats.val_nll < best_val) {
      best_val = stats.val_nll;
      best_theta = theta;
      report.best_epoch = epoch;
    }
  }

  if (report.best_epoch < 0) {
    std::ostringstream oss;
    oss << "train_cde: no feasible iterate found; feasibility per epoch:";
    for (const auto& e : report.epochs) oss << " " << e.feasible_fraction;
    throw std::runtime_error(oss.str());
  }
  const CdeParams best = CdeParams::unpack(best_theta, n, d, params.phi_frozen);
  RationalFactorCDE model(best.phi(), best.psi(), best.L, cfg.pick);
  if (!model.feasible()) {
    throw std::runtime_error("train_cde: best iterate failed the final normalization solve");
  }
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Initial-belief training

InitialLoss initial_loss(const InitialParams& params, const RationalFactorCDE& model,
                         const Eigen::MatrixXd& x0s, const TrainConfig& cfg) {
  if (x0s.rows() < 1) throw std::invalid_argument("initial_loss: batch must be nonempty");
  InitialLoss out;
  const BetaBasis chi = params.chi();
  const int n = model.n();
  const Eigen::MatrixXd h0 = params.L0.transpose() * params.L0;
  const CrossMomentTensor e = cross_moment_tensor(model.phi(), chi, "phi", "chi");
  Eigen::VectorXd vr(n * n), vh(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      vr[i * n + j] = model.r()(i, j);
      vh[i * n + j] = h0(i, j);
    }
  }
  const double z = vr.dot(e.matrix() * vh);
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw std::runtime_error("initial_loss: normalization constant is not positive");
  }
  out.log_z = std::log(z);

  double nll_sum = 0.0;
  int counted = 0;
  for (int s = 0; s < x0s.rows(); ++s) {
    const Eigen::VectorXd x = x0s.row(s).transpose();
    const double lg = model.log_g(x);
    const ScaledForm h = scaled_form(chi.eval_log(x), h0);
    if (!(h.value > 0.0) || !std::isfinite(lg)) {
      ++out.skipped;
      continue;
    }
    nll_sum -= lg + h.log_offset + std::log(h.value);
    ++counted;
  }
  out.nll = sanitize_mean(nll_sum, counted) + out.log_z;
  double reg = 0.0;
  for (int i = 0; i < params.n(); ++i) {
    if (params.chi_frozen && *params.chi_frozen == i) continue;
    for (int m = 0; m < params.d(); ++m) {
      reg += params.chi_alpha(i, m) * params.chi_alpha(i, m) +
             params.chi_beta(i, m) * params.chi_beta(i, m);
    }
  }
  out.reg = cfg.c_reg * reg;
  out.value = out.nll + out.reg;
  return out;
}

InitialGradient initial_loss_grad(const InitialParams& params, const RationalFactorCDE& model,
                                  const Eigen::MatrixXd& x0s, const TrainConfig& cfg,
                                  GradMode mode) {
  InitialGradient out;
  out.loss = initial_loss(params, model, x0s, cfg);
  const int n = params.n();
  const int d = params.d();
  if (mode == GradMode::kFiniteDifference) {
    Eigen::VectorXd theta = params.pack();
    out.grad.resize(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double h = 1e-5 * (1.0 + std::abs(theta[k]));
      Eigen::VectorXd tp = theta, tm = theta;
      tp[k] += h;
      tm[k] -= h;
      const double lp =
          initial_loss(InitialParams::unpack(tp, n, d, params.chi_frozen), model, x0s, cfg).value;
      const double lm =
          initial_loss(InitialParams::unpack(tm, n, d, params.chi_frozen), model, x0s, cfg).value;
      out.grad[k] = (lp - lm) / (2.0 * h);
    }
    return out;
  }

  const BetaBasis chi = params.chi();
  const Eigen::MatrixXd h0 = params.L0.transpose() * params.L0;
  const CrossMomentTensor e = cross_moment_tensor(model.phi(), chi, "phi", "chi");
  Eigen::VectorXd vr(n * n), vh(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      vr[i * n + j] = model.r()(i, j);
      vh[i * n + j] = h0(i, j);
    }
  }
  const double z = vr.dot(e.matrix() * vh);

  Eigen::MatrixXd h0bar = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd chi_alpha_bar = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd chi_beta_bar = Eigen::MatrixXd::Zero(n, d);

  // log Z term.
  const Eigen::VectorXd g_on_pairs = e.matrix().transpose() * vr;  // <g, chi_k chi_l>
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      h0bar(k, l) += g_on_pairs[k * n + l] / z;
    }
  }
  {
    Eigen::MatrixXd wbar(n * n, n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            wbar(i * n + j, k * n + l) = vr[i * n + j] * vh[k * n + l] / z;
    Eigen::MatrixXd dummy_a = Eigen::MatrixXd::Zero(n, d);
    Eigen::MatrixXd dummy_b = Eigen::MatrixXd::Zero(n, d);
    accumulate_cross_tensor_shape_grad(model.phi(), chi, e.matrix(), wbar, dummy_a, dummy_b,
                                       chi_alpha_bar, chi_beta_bar);
  }

  // Data term: -mean log h0(x).
  int counted = 0;
  for (int s = 0; s < x0s.rows(); ++s) {
    const Eigen::VectorXd x = x0s.row(s).transpose();
    const ScaledForm h = scaled_form(chi.eval_log(x), h0);
    if (!(h.value > 0.0) || !std::isfinite(model.log_g(x))) continue;
    ++counted;
  }
  const double inv_cnt = counted > 0 ? 1.0 / counted : 0.0;
  for (int s = 0; s < x0s.rows(); ++s) {
    const Eigen::VectorXd x = x0s.row(s).transpose();
    const ScaledForm h = scaled_form(chi.eval_log(x), h0);
    if (!(h.value > 0.0) || !std::isfinite(model.log_g(x))) continue;
    h0bar -= inv_cnt * (h.u * h.u.transpose() / h.value);
    const Eigen::VectorXd hu = 2.0 * (h0 * h.u);
    for (int i = 0; i < n; ++i) {
      const double c = hu[i] * h.u[i] / h.value;
      for (int m = 0; m < d; ++m) {
        chi_alpha_bar(i, m) -= inv_cnt * c * std::log(x[m]);
        chi_beta_bar(i, m) -= inv_cnt * c * std::log1p(-x[m]);
      }
    }
  }

  // Regularization and frozen row.
  for (int i = 0; i < n; ++i) {
    if (params.chi_frozen && *params.chi_frozen == i) continue;
    for (int m = 0; m < d; ++m) {
      chi_alpha_bar(i, m) += 2.0 * cfg.c_reg * params.chi_alpha(i, m);
      chi_beta_bar(i, m) += 2.0 * cfg.c_reg * params.chi_beta(i, m);
    }
  }
  if (params.chi_frozen) {
    chi_alpha_bar.row(*params.chi_frozen).setZero();
    chi_beta_bar.row(*params.chi_frozen).setZero();
  }

  InitialParams g;
  g.L0 = params.L0 * (h0bar + h0bar.transpose());
  g.chi_alpha = chi_alpha_bar;
  g.chi_beta = chi_beta_bar;
  g.chi_frozen = params.chi_frozen;
  out.grad = g.pack();
  return out;
}

Belief train_initial(const Eigen::MatrixXd& x0s, const RationalFactorCDE& model,
                     const TrainConfig& cfg, TrainReport* report,
                     std::optional<int> chi_frozen) {
  if (!model.feasible()) {
    throw std::invalid_argument("train_initial: model must be feasible");
  }
  const int n = model.n();
  const int d = model.d();
  if (x0s.cols() != d) throw std::invalid_argument("train_initial: data dimension mismatch");
  const int total = static_cast<int>(x0s.rows());
  if (total < 2) throw std::invalid_argument("train_initial: need at least 2 samples");

  const std::vector<int> order = shuffled_indices(total, cfg.seed, kSplitStream + 1);
  const int n_val =
      std::min(total - 1, std::max(0, static_cast<int>(std::lround(cfg.val_fraction * total))));
  const int n_train = total - n_val;
  const Eigen::MatrixXd train = gather_rows(x0s, order, 0, n_train);
  const Eigen::MatrixXd val = gather_rows(x0s, order, n_train, total);

  RngStream rs(cfg.seed, kInitStream + 1);
  InitialParams params;
  params.chi_frozen = chi_frozen;
  params.chi_alpha = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  params.chi_beta = log_uniform_shapes(n, d, rs, 1.0, 20.0);
  if (chi_frozen) {
    params.chi_alpha.row(*chi_frozen).setOnes();
    params.chi_beta.row(*chi_frozen).setOnes();
  }
  params.L0 = Eigen::MatrixXd::Identity(n, n);
  {
    // Scale so the initial normalization constant is 1.
    const InitialLoss probe = initial_loss(params, model, train.topRows(std::min(n_train, 16)),
                                           cfg);
    params.L0 *= std::exp(-0.5 * probe.log_z);
  }

  Eigen::VectorXd theta = params.pack();
  AdamOptimizer adam(static_cast<int>(theta.size()), cfg.learning_rate);
  Eigen::VectorXd best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<int> idx =
        shuffled_indices(n_train, cfg.seed, kEpochStreamBase + 0x8000 + epoch);
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int stop = std::min(n_train, start + cfg.batch_size);
      Eigen::MatrixXd bx(stop - start, d);
      for (int i = start; i < stop; ++i) bx.row(i - start) = train.row(idx[i]);
      const InitialParams cur = InitialParams::unpack(theta, n, d, chi_frozen);
      const InitialGradient g = initial_loss_grad(cur, model, bx, cfg, cfg.grad_mode);
      if (!std::isfinite(g.loss.value) || !g.grad.allFinite()) break;
      if (cfg.optimizer == OptimizerKind::kAdam) {
        adam.step(theta, g.grad);
      } else {
        theta -= cfg.learning_rate * g.grad;
      }
      InitialParams stepped = InitialParams::unpack(theta, n, d, chi_frozen);
      stepped.chi_alpha = stepped.chi_alpha.cwiseMax(cfg.alpha_min).cwiseMin(cfg.alpha_max);
      stepped.chi_beta = stepped.chi_beta.cwiseMax(cfg.alpha_min).cwiseMin(cfg.alpha_max);
      if (chi_frozen) {
        stepped.chi_alpha.row(*chi_frozen).setOnes();
        stepped.chi_beta.row(*chi_frozen).setOnes();
      }
      theta = stepped.pack();
    }
    const InitialParams cur = InitialParams::unpack(theta, n, d, chi_frozen);
    const InitialLoss train_eval = initial_loss(cur, model, train, cfg);
    double val_nll = train_eval.nll;
    if (n_val > 0) {
      val_nll = initial_loss(cur, model, val, cfg).nll;
    }
    if (report) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_nll = train_eval.nll;
      stats.val_nll = val_nll;
      stats.residual = model.normalization().residual;
      stats.r_min_eig = model.normalization().r_min_eig;
      stats.feasible_fraction = 1.0;
      stats.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report->epochs.push_back(stats);
    }
    if (std::isfinite(val_nll) && val_nll < best_val) {
      best_val = val_nll;
      best_theta = theta;
      best_epoch = epoch;
    }
  }
  if (report) report->best_epoch = best_epoch;

  const InitialParams best = InitialParams::unpack(best_theta, n, d, chi_frozen);
  PropagationEngine engine(model);
  return engine.initial_belief(best.chi(), best.L0);
}

// ---------------------------------------------------------------------------
// Config / report serialization

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{
      {"n", n_basis},
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"w_barrier", w_barrier},
      {"w_pen", w_pen},
      {"epsilon", epsilon},
      {"c_reg", c_reg},
      {"alpha_min", alpha_min},
      {"alpha_max", alpha_max},
      {"seed", seed},
      {"optimizer", optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
      {"grad_mode", grad_mode == GradMode::kAnalyticAdjoint ? "analytic" : "fd"},
      {"val_fraction", val_fraction},
      {"eigenvalue_pick",
       pick == EigenvaluePick::kLargestPositive ? "largest" : "best_pd_margin"},
      {"fd_gap_threshold", fd_gap_threshold},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"n", "learning_rate", "batch_size", "epochs", "w_barrier", "w_pen", "epsilon",
                 "c_reg", "alpha_min", "alpha_max", "seed", "optimizer", "grad_mode",
                 "val_fraction", "eigenvalue_pick", "fd_gap_threshold"},
             "train");
  TrainConfig c;
  c.n_basis = j.value("n", c.n_basis);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.w_barrier = j.value("w_barrier", c.w_barrier);
  c.w_pen = j.value("w_pen", c.w_pen);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.c_reg = j.value("c_reg", c.c_reg);
  c.alpha_min = j.value("alpha_min", c.alpha_min);
  c.alpha_max = j.value("alpha_max", c.alpha_max);
  c.seed = j.value("seed", c.seed);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.fd_gap_threshold = j.value("fd_gap_threshold", c.fd_gap_threshold);
  if (j.contains("optimizer")) {
    const std::string o = j.at("optimizer").get<std::string>();
    if (o == "adam") {
      c.optimizer = OptimizerKind::kAdam;
    } else if (o == "sgd") {
      c.optimizer = OptimizerKind::kSgd;
    } else {
      throw ValidationError("train.optimizer must be 'adam' or 'sgd'");
    }
  }
  if (j.contains("grad_mode")) {
    const std::string g = j.at("grad_mode").get<std::string>();
    if (g == "analytic") {
      c.grad_mode = GradMode::kAnalyticAdjoint;
    } else if (g == "fd") {
      c.grad_mode = GradMode::kFiniteDifference;
    } else {
      throw ValidationError("train.grad_mode must be 'analytic' or 'fd'");
    }
  }
  if (j.contains("eigenvalue_pick")) {
    const std::string p = j.at("eigenvalue_pick").get<std::string>();
    if (p == "largest") {
      c.pick = EigenvaluePick::kLargestPositive;
    } else if (p == "best_pd_margin") {
      c.pick = EigenvaluePick::kBestPdMargin;
    } else {
      throw ValidationError("train.eigenvalue_pick must be 'largest' or 'best_pd_margin'");
    }
  }
  if (!(c.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be > 0");
  if (c.batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (c.n_basis < 1) throw ValidationError("train.n must be >= 1");
  if (c.alpha_min < kAlphaFloor || c.alpha_max < c.alpha_min) {
    throw ValidationError("train.alpha bounds outside the admissible range");
  }
  if (c.val_fraction < 0.0 || c.val_fraction >= 1.0) {
    throw ValidationError("train.val_fraction must be in [0, 1)");
  }
  return c;
}

std::string TrainReport::to_csv() const {
  std::ostringstream oss;
  oss << "epoch,train_nll,val_nll,residual,r_min_eig,feasible,seconds\n";
  for (const auto& e : epochs) {
    oss << e.epoch << ',' << format_double(e.train_nll) << ',' << format_double(e.val_nll) << ','
        << format_double(e.residual) << ',' << format_double(e.r_min_eig) << ','
        << format_double(e.feasible_fraction) << ',' << format_double(e.seconds) << '\n';
  }
  return oss.str();
}

}  // namespace sosmp
