#include "sosmp/quadratic_form.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace sosmp {

QuadraticForm::QuadraticForm(BetaBasis basis, const Eigen::MatrixXd& coeff)
    : basis_(std::move(basis)), coeff_(0.5 * (coeff + coeff.transpose())) {
  if (coeff.rows() != coeff.cols() || coeff.rows() != basis_.size()) {
    throw std::invalid_argument("QuadraticForm: coefficient matrix must be n x n");
  }
}

double QuadraticForm::eval(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd b = basis_.eval(x);
  return b.dot(coeff_ * b);
}

double QuadraticForm::integrate() const {
  return coeff_.cwiseProduct(gram_matrix(basis_)).sum();
}

nlohmann::json QuadraticForm::to_json(const std::string& basis_id) const {
  const int n = basis_.size();
  std::vector<double> upper;
  upper.reserve(n * (n + 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      upper.push_back(coeff_(i, j));
    }
  }
  return nlohmann::json{{"basis_id", basis_id}, {"coeff", upper}};
}

Eigen::MatrixXd QuadraticForm::coeff_from_json(const nlohmann::json& j, int n) {
  const auto upper = j.at("coeff").get<std::vector<double>>();
  if (static_cast<int>(upper.size()) != n * (n + 1) / 2) {
    throw std::invalid_argument("QuadraticForm: upper triangle length mismatch");
  }
  Eigen::MatrixXd c(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int jj = i; jj < n; ++jj) {
      c(i, jj) = upper[idx];
      c(jj, i) = upper[idx];
      ++idx;
    }
  }
  return c;
}

QuadraticForm integrate_out_dependent(const PsdFactor& q, const BetaBasis& phi,
                                      const BetaBasis& psi) {
  if (phi.size() != psi.size() || q.size() != phi.size()) {
    throw std::invalid_argument("integrate_out_dependent: size mismatch");
  }
  const Eigen::MatrixXd gamma = gram_matrix(psi);
  return QuadraticForm(phi, gamma.cwiseProduct(q.gram()));
}

}  // namespace sosmp
