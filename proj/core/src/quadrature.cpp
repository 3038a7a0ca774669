#include "sosmp/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sosmp {

namespace {

// Nodes/weights on [-1, 1] by Newton iteration on the Legendre polynomial,
// then mapped to (0, 1).
GaussLegendre compute_rule(int order) {
  if (order < 1) throw std::invalid_argument("GaussLegendre: order must be >= 1");
  GaussLegendre rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Chebyshev-like initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Evaluate P_order(x) and its derivative by recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.nodes[order - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[order - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

const GaussLegendre& GaussLegendre::get(int order) {
  static std::map<int, GaussLegendre> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(order);
  if (it == cache.end()) {
    it = cache.emplace(order, compute_rule(order)).first;
  }
  return it->second;
}

double quadrature_oracle(const std::function<double(const Eigen::VectorXd&)>& f,
                         int d, int points_per_dim) {
  if (d < 1 || d > 3) {
    throw std::invalid_argument("quadrature_oracle: d must be in [1, 3]");
  }
  const GaussLegendre& rule = GaussLegendre::get(points_per_dim);
  const int p = points_per_dim;
  Eigen::VectorXd x(d);
  double total = 0.0;
  if (d == 1) {
    for (int i = 0; i < p; ++i) {
      x[0] = rule.nodes[i];
      total += rule.weights[i] * f(x);
    }
  } else if (d == 2) {
    for (int i = 0; i < p; ++i) {
      x[0] = rule.nodes[i];
      for (int j = 0; j < p; ++j) {
        x[1] = rule.nodes[j];
        total += rule.weights[i] * rule.weights[j] * f(x);
      }
    }
  } else {
    for (int i = 0; i < p; ++i) {
      x[0] = rule.nodes[i];
      for (int j = 0; j < p; ++j) {
        x[1] = rule.nodes[j];
        const double wij = rule.weights[i] * rule.weights[j];
        for (int k = 0; k < p; ++k) {
          x[2] = rule.nodes[k];
          total += wij * rule.weights[k] * f(x);
        }
      }
    }
  }
  return total;
}

}  // namespace sosmp
