#include "sosmp/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace sosmp {

namespace {
void require_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("expected a square matrix");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("expected a symmetric matrix");
  }
}
}  // namespace

SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m) {
  require_symmetric(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_eigen: solver failed to converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

GeneralEigen general_real_eigen(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("general_real_eigen: expected a square matrix");
  }
  if (!m.allFinite()) {
    throw std::runtime_error("general_real_eigen: non-finite entries");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("general_real_eigen: solver failed to converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

std::optional<double> log_det_pd(const Eigen::MatrixXd& m) {
  require_symmetric(m);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    return std::nullopt;
  }
  double acc = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    acc += std::log(l(i, i));
  }
  return 2.0 * acc;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace sosmp
