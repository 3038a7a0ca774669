#pragma once

#include <Eigen/Core>
#include <functional>

namespace sosmp {

/// Gauss-Legendre rule mapped to (0, 1). Rules are cached per order.
struct GaussLegendre {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  static const GaussLegendre& get(int order);
};

/// Tensorized Gauss-Legendre estimate of the unit-box integral of f.
/// Verification oracle only; the analytic code paths never call this.
/// Refuses d > 3 (the tensor grid is for desk-scale checks).
double quadrature_oracle(const std::function<double(const Eigen::VectorXd&)>& f,
                         int d, int points_per_dim);

}  // namespace sosmp
