#pragma once

#include <Eigen/Core>
#include <optional>

namespace sosmp {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

/// Eigendecomposition of a symmetric matrix. Throws std::invalid_argument if
/// the input is not symmetric within 1e-12 (relative to its max entry).
SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& m);

struct GeneralEigen {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // unit-norm columns
};

/// Eigendecomposition of a general real matrix (complex pairs allowed).
/// Throws std::runtime_error if the solver does not converge; callers treat
/// that as a recoverable numeric condition.
GeneralEigen general_real_eigen(const Eigen::MatrixXd& m);

/// Log-determinant of a symmetric positive definite matrix via Cholesky.
/// Returns nullopt when the factorization fails, i.e. the matrix is not PD;
/// that outcome is a signal, not an error.
std::optional<double> log_det_pd(const Eigen::MatrixXd& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace sosmp
