#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "sosmp/belief.hpp"
#include "sosmp/quadrature.hpp"
#include "support/oracles.hpp"
#include "support/test_util.hpp"

using namespace sosmp;
using test::vec;

namespace {

RationalFactorCDE feasible_model(int n, int d, std::uint64_t seed, double hi = 4.0) {
  RngStream rs(seed, 0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const BetaBasis phi = test::random_basis(n, d, rs, 1.0, hi, 0);
    const BetaBasis psi = test::random_basis(n, d, rs, 1.0, hi);
    const Eigen::MatrixXd l =
        Eigen::MatrixXd::Identity(n, n) + 0.3 * test::random_matrix(n, n, rs);
    RationalFactorCDE model(phi, psi, l);
    if (model.feasible()) return model;
  }
  throw std::runtime_error("no feasible model");
}

RationalFactorCDE integer_feasible_model(int n, int d, std::uint64_t seed, int hi = 3) {
  RngStream rs(seed, 0);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const BetaBasis phi = test::random_integer_basis(n, d, rs, hi, 0);
    const BetaBasis psi = test::random_integer_basis(n, d, rs, hi);
    const Eigen::MatrixXd l =
        Eigen::MatrixXd::Identity(n, n) + 0.3 * test::random_matrix(n, n, rs);
    RationalFactorCDE model(phi, psi, l);
    if (model.feasible()) return model;
  }
  throw std::runtime_error("no feasible model");
}

RationalFactorCDE uniform_model() {
  const BetaBasis c1 = BetaBasis::constant(1, 1);
  return RationalFactorCDE(c1, c1, Eigen::MatrixXd::Constant(1, 1, 1.0));
}

}  // namespace

TEST_CASE("uniform model and uniform belief are a fixed point") {
  const RationalFactorCDE model = uniform_model();
  PropagationEngine engine(model);
  Belief b = engine.initial_belief(BetaBasis::constant(1, 1), Eigen::MatrixXd::Ones(1, 1));
  CHECK(engine.integrate_belief(b) == doctest::Approx(1.0).epsilon(1e-14));
  for (int k = 0; k < 5; ++k) {
    const PropagationResult step = engine.propagate(b);
    CHECK(step.raw_mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(!step.renormalized);
    b = step.belief;
    CHECK(b.eval(vec({0.37})) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(b.step() == 5);
}

TEST_CASE("integrate_belief matches quadrature and normalize fixes mass to one") {
  RngStream rs(211, 0);
  const RationalFactorCDE model = integer_feasible_model(3, 1, 211);
  PropagationEngine engine(model);
  const BetaBasis chi = test::random_integer_basis(3, 1, rs, 4);
  const Eigen::MatrixXd l0 = test::random_matrix(3, 3, rs);
  const Belief raw(model.r(), model.phi(), chi, l0, 0, 0.0);
  const double analytic = engine.integrate_belief(raw);
  const double quad = quadrature_oracle(
      [&](const Eigen::VectorXd& x) { return raw.eval(x); }, 1, 400);
  CHECK(analytic == doctest::Approx(quad).epsilon(1e-9));

  const Belief normalized = engine.normalized(raw);
  CHECK(engine.integrate_belief(normalized) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalized.log_z() == 0.0);
}

TEST_CASE("analytic propagation matches the quadrature oracle") {
  SUBCASE("d=1, n=4, K=3 pointwise") {
    RngStream rs(223, 0);
    const RationalFactorCDE model = integer_feasible_model(4, 1, 223);
    PropagationEngine engine(model);
    const BetaBasis chi = test::random_integer_basis(4, 1, rs, 3);
    const Eigen::MatrixXd l0 =
        Eigen::MatrixXd::Identity(4, 4) + 0.2 * test::random_matrix(4, 4, rs);
    Belief b = engine.initial_belief(chi, l0);

    test::QuadraturePropagator oracle(model, 64,
                                      [&](const Eigen::VectorXd& x) { return b.eval(x); });
    double max_err = 0.0;
    for (int k = 1; k <= 3; ++k) {
      b = engine.propagate(b).belief;
      for (int t = 0; t < 50; ++t) {
        const Eigen::VectorXd y = vec({(t + 0.5) / 50.0});
        max_err = std::max(max_err, std::abs(b.eval(y) - oracle.eval_next(y)));
      }
      oracle.advance();
    }
    CHECK(max_err <= 1e-6);
  }
  SUBCASE("d=2, n=3, K=2 pointwise") {
    RngStream rs(227, 0);
    const RationalFactorCDE model = integer_feasible_model(3, 2, 227);
    PropagationEngine engine(model);
    const BetaBasis chi = test::random_integer_basis(3, 2, rs, 3);
    const Eigen::MatrixXd l0 =
        Eigen::MatrixXd::Identity(3, 3) + 0.2 * test::random_matrix(3, 3, rs);
    Belief b = engine.initial_belief(chi, l0);

    test::QuadraturePropagator oracle(model, 32,
                                      [&](const Eigen::VectorXd& x) { return b.eval(x); });
    double max_err = 0.0;
    for (int k = 1; k <= 2; ++k) {
      b = engine.propagate(b).belief;
      for (int t = 0; t < 25; ++t) {
        const Eigen::VectorXd y = test::random_interior_point(2, rs);
        max_err = std::max(max_err, std::abs(b.eval(y) - oracle.eval_next(y)));
      }
      oracle.advance();
    }
    CHECK(max_err <= 1e-6);
  }
}

TEST_CASE("mass is conserved over ten steps without renormalization") {
  const RationalFactorCDE model = feasible_model(4, 2, 229);
  PropagationEngine engine(model);
  RngStream rs(229, 1);
  const BetaBasis chi = test::random_basis(4, 2, rs, 1.0, 5.0);
  const Eigen::MatrixXd l0 =
      Eigen::MatrixXd::Identity(4, 4) + 0.2 * test::random_matrix(4, 4, rs);
  Belief b = engine.initial_belief(chi, l0);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const PropagationResult step = engine.propagate(b);
    CHECK(!step.renormalized);
    worst = std::max(worst, std::abs(step.raw_mass - 1.0));
    b = step.belief;
  }
  CHECK(worst <= 1e-6);
  CHECK(b.h().rows() == 4);  // representation stays n x n at every step
}

TEST_CASE("eval_belief symmetry for mirror-symmetric bases") {
  // alpha == beta per row makes every kernel invariant under x -> 1-x.
  RngStream rs(233, 0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXd a(3, 1);
    a << 1.0, 2.0 + rs.next_u01(), 3.0 + rs.next_u01();
    const BetaBasis phi(a, a, 0);
    Eigen::MatrixXd ap(3, 1);
    ap << 1.5, 2.5, 4.0;
    const BetaBasis psi(ap, ap);
    const Eigen::MatrixXd l =
        Eigen::MatrixXd::Identity(3, 3) + 0.3 * test::random_matrix(3, 3, rs);
    const RationalFactorCDE model(phi, psi, l);
    if (!model.feasible()) continue;
    PropagationEngine engine(model);
    Eigen::MatrixXd ac(3, 1);
    ac << 1.0, 2.0, 3.0;
    const BetaBasis chi(ac, ac);
    Belief b = engine.initial_belief(chi, Eigen::MatrixXd::Identity(3, 3));
    b = engine.propagate(b).belief;
    for (int t = 0; t < 20; ++t) {
      const double x = 0.02 + 0.96 * rs.next_u01();
      CHECK(b.eval(vec({x})) == doctest::Approx(b.eval(vec({1.0 - x}))).epsilon(1e-10));
    }
    return;
  }
  FAIL("no feasible symmetric model found");
}

TEST_CASE("pairwise marginals") {
  SUBCASE("uniform belief gives a flat grid") {
    const BetaBasis c1 = BetaBasis::constant(1, 2);
    const RationalFactorCDE model(c1, c1, Eigen::MatrixXd::Ones(1, 1));
    PropagationEngine engine(model);
    const Belief b = engine.initial_belief(BetaBasis::constant(1, 2),
                                           Eigen::MatrixXd::Ones(1, 1));
    const Eigen::MatrixXd grid = engine.marginal_grid(b, 0, 1, 8);
    CHECK((grid.array() - 1.0).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("d=2 full-plane marginal equals the density") {
    const RationalFactorCDE model = feasible_model(3, 2, 239);
    PropagationEngine engine(model);
    RngStream rs(239, 1);
    const BetaBasis chi = test::random_basis(3, 2, rs, 1.0, 4.0);
    const Belief b = engine.initial_belief(chi, Eigen::MatrixXd::Identity(3, 3));
    const int m = 6;
    const Eigen::MatrixXd grid = engine.marginal_grid(b, 0, 1, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const Eigen::VectorXd x = vec({(i + 0.5) / m, (j + 0.5) / m});
        CHECK(grid(i, j) == doctest::Approx(b.eval(x)).epsilon(1e-10));
      }
    }
  }
  SUBCASE("d=3 marginal matches quadrature over the dropped dimension") {
    const RationalFactorCDE model = feasible_model(3, 3, 241);
    PropagationEngine engine(model);
    RngStream rs(241, 1);
    const BetaBasis chi = test::random_basis(3, 3, rs, 1.0, 4.0);
    const Belief b = engine.initial_belief(chi, Eigen::MatrixXd::Identity(3, 3));
    Eigen::VectorXd pts(3);
    pts << 0.2, 0.5, 0.8;
    const Eigen::MatrixXd grid = engine.marginal_grid(b, 0, 1, pts, pts);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double quad = quadrature_oracle(
            [&](const Eigen::VectorXd& w) {
              return b.eval(vec({pts[i], pts[j], w[0]}));
            },
            1, 400);
        CHECK(std::abs(grid(i, j) - quad) <= 1e-7);
      }
    }
  }
  SUBCASE("invalid dimension pairs are rejected") {
    const RationalFactorCDE model = feasible_model(3, 2, 251);
    PropagationEngine engine(model);
    RngStream rs(251, 1);
    const Belief b = engine.initial_belief(test::random_basis(3, 2, rs),
                                           Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS(engine.marginal_grid(b, 0, 0, 4), std::invalid_argument);
    CHECK_THROWS_AS(engine.marginal_grid(b, 0, 2, 4), std::invalid_argument);
  }
}

TEST_CASE("moments") {
  SUBCASE("uniform belief") {
    const BetaBasis c1 = BetaBasis::constant(1, 2);
    const RationalFactorCDE model(c1, c1, Eigen::MatrixXd::Ones(1, 1));
    PropagationEngine engine(model);
    const Belief b = engine.initial_belief(BetaBasis::constant(1, 2),
                                           Eigen::MatrixXd::Ones(1, 1));
    const auto [mean, var] = engine.moments(b);
    for (int m = 0; m < 2; ++m) {
      CHECK(mean[m] == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(var[m] == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
    }
  }
  SUBCASE("mirror-symmetric belief has mean one half") {
    Eigen::MatrixXd a(2, 1);
    a << 1.0, 3.0;
    const BetaBasis phi(a, a, 0);
    Eigen::MatrixXd ap(2, 1);
    ap << 2.0, 4.0;
    const BetaBasis psi(ap, ap);
    RngStream rs(257, 0);
    for (int attempt = 0; attempt < 50; ++attempt) {
      const Eigen::MatrixXd l =
          Eigen::MatrixXd::Identity(2, 2) + 0.3 * test::random_matrix(2, 2, rs);
      const RationalFactorCDE model(phi, psi, l);
      if (!model.feasible()) continue;
      PropagationEngine engine(model);
      Eigen::MatrixXd ac(2, 1);
      ac << 1.0, 2.0;
      const Belief b = engine.initial_belief(BetaBasis(ac, ac), Eigen::MatrixXd::Identity(2, 2));
      const auto [mean, var] = engine.moments(b);
      CHECK(mean[0] == doctest::Approx(0.5).epsilon(1e-12));
      return;
    }
    FAIL("no feasible symmetric model found");
  }
  SUBCASE("matches quadrature for a random 1d belief") {
    const RationalFactorCDE model = feasible_model(3, 1, 263);
    PropagationEngine engine(model);
    RngStream rs(263, 1);
    const Belief b = engine.initial_belief(test::random_basis(3, 1, rs, 1.0, 5.0),
                                           Eigen::MatrixXd::Identity(3, 3));
    const auto [mean, var] = engine.moments(b);
    const double m1 = quadrature_oracle(
        [&](const Eigen::VectorXd& x) { return x[0] * b.eval(x); }, 1, 400);
    const double m2 = quadrature_oracle(
        [&](const Eigen::VectorXd& x) { return x[0] * x[0] * b.eval(x); }, 1, 400);
    CHECK(std::abs(mean[0] - m1) <= 1e-8);
    CHECK(std::abs(var[0] - (m2 - m1 * m1)) <= 1e-8);
  }
}

TEST_CASE("belief serialization round trip") {
  const RationalFactorCDE model = feasible_model(3, 1, 269);
  PropagationEngine engine(model);
  RngStream rs(269, 1);
  Belief b = engine.initial_belief(test::random_basis(3, 1, rs), Eigen::MatrixXd::Identity(3, 3));
  b = engine.propagate(b).belief;
  const Belief back = Belief::from_json(b.to_json(), model);
  CHECK(back.step() == b.step());
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = test::random_interior_point(1, rs);
    CHECK(back.eval(x) == doctest::Approx(b.eval(x)).epsilon(1e-10));
  }
}
