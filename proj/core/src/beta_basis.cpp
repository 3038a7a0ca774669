#include "sosmp/beta_basis.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace sosmp {

void require_interior(const Eigen::VectorXd& x) {
  for (Eigen::Index m = 0; m < x.size(); ++m) {
    if (!(x[m] > 0.0) || !(x[m] < 1.0)) {
      throw std::domain_error("evaluation point must be strictly inside (0,1)^d");
    }
  }
}

BetaBasis::BetaBasis(Eigen::MatrixXd alpha, Eigen::MatrixXd beta,
                     std::optional<int> frozen_constant)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), frozen_constant_(frozen_constant) {
  if (alpha_.rows() != beta_.rows() || alpha_.cols() != beta_.cols()) {
    throw std::invalid_argument("BetaBasis: alpha and beta must have the same shape");
  }
  if (alpha_.rows() < 1 || alpha_.cols() < 1) {
    throw std::invalid_argument("BetaBasis: need at least one row and one dimension");
  }
  if ((alpha_.array() < kAlphaFloor).any() || (beta_.array() < kAlphaFloor).any()) {
    throw std::invalid_argument("BetaBasis: shape parameters below admissible floor");
  }
  if (frozen_constant_) {
    const int i = *frozen_constant_;
    if (i < 0 || i >= size()) {
      throw std::invalid_argument("BetaBasis: frozen_constant index out of range");
    }
    // Pin the row exactly; the constant function tolerates no drift.
    alpha_.row(i).setOnes();
    beta_.row(i).setOnes();
  }
}

BetaBasis BetaBasis::constant(int n, int d) {
  return BetaBasis(Eigen::MatrixXd::Ones(n, d), Eigen::MatrixXd::Ones(n, d),
                   n == 1 ? std::optional<int>(0) : std::nullopt);
}

Eigen::VectorXd BetaBasis::eval_log(const Eigen::VectorXd& x) const {
  require_interior(x);
  if (x.size() != dim()) {
    throw std::invalid_argument("BetaBasis::eval: dimension mismatch");
  }
  Eigen::VectorXd lx(dim()), l1mx(dim());
  for (int m = 0; m < dim(); ++m) {
    lx[m] = std::log(x[m]);
    l1mx[m] = std::log1p(-x[m]);
  }
  return (alpha_.array() - 1.0).matrix() * lx + (beta_.array() - 1.0).matrix() * l1mx;
}

Eigen::VectorXd BetaBasis::eval(const Eigen::VectorXd& x) const {
  return eval_log(x).array().exp();
}

ExponentVector BetaBasis::row_exponents(int i) const {
  return {alpha_.row(i).transpose().array() - 1.0, beta_.row(i).transpose().array() - 1.0};
}

ExponentVector BetaBasis::pair_exponents(int i, int j) const {
  return {(alpha_.row(i) + alpha_.row(j)).transpose().array() - 2.0,
          (beta_.row(i) + beta_.row(j)).transpose().array() - 2.0};
}

bool BetaBasis::same_shape_as(const BetaBasis& o) const {
  return size() == o.size() && dim() == o.dim() && alpha_ == o.alpha_ && beta_ == o.beta_;
}

nlohmann::json BetaBasis::to_json() const {
  nlohmann::json j;
  j["n"] = size();
  j["d"] = dim();
  std::vector<double> a, b;
  a.reserve(alpha_.size());
  b.reserve(beta_.size());
  for (int i = 0; i < size(); ++i) {
    for (int m = 0; m < dim(); ++m) {
      a.push_back(alpha_(i, m));
      b.push_back(beta_(i, m));
    }
  }
  j["alpha"] = a;
  j["beta"] = b;
  if (frozen_constant_) {
    j["frozen_constant"] = *frozen_constant_;
  } else {
    j["frozen_constant"] = nullptr;
  }
  return j;
}

BetaBasis BetaBasis::from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  const int d = j.at("d").get<int>();
  const auto a = j.at("alpha").get<std::vector<double>>();
  const auto b = j.at("beta").get<std::vector<double>>();
  if (static_cast<int>(a.size()) != n * d || static_cast<int>(b.size()) != n * d) {
    throw std::invalid_argument("BetaBasis::from_json: alpha/beta length mismatch");
  }
  Eigen::MatrixXd alpha(n, d), beta(n, d);
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < d; ++m) {
      alpha(i, m) = a[i * d + m];
      beta(i, m) = b[i * d + m];
    }
  }
  std::optional<int> frozen;
  if (j.contains("frozen_constant") && !j.at("frozen_constant").is_null()) {
    frozen = j.at("frozen_constant").get<int>();
  }
  return BetaBasis(std::move(alpha), std::move(beta), frozen);
}

}  // namespace sosmp
