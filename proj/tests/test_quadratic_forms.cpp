#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "sosmp/linalg.hpp"
#include "sosmp/quadratic_form.hpp"
#include "sosmp/quadrature.hpp"
#include "support/test_util.hpp"

using namespace sosmp;
using test::vec;

TEST_CASE("eval_form") {
  SUBCASE("identity coefficients on a constant basis sum the squares") {
    const QuadraticForm qf(BetaBasis::constant(2, 1), Eigen::MatrixXd::Identity(2, 2));
    CHECK(qf.eval(vec({0.3})) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("zero coefficients give zero") {
    const QuadraticForm qf(BetaBasis::constant(2, 1), Eigen::MatrixXd::Zero(2, 2));
    CHECK(qf.eval(vec({0.7})) == 0.0);
  }
  SUBCASE("matches the naive double loop") {
    RngStream rs(31, 0);
    for (int trial = 0; trial < 20; ++trial) {
      const BetaBasis basis = test::random_basis(4, 2, rs);
      const Eigen::MatrixXd a = test::random_matrix(4, 4, rs);
      const Eigen::MatrixXd c = a.transpose() * a;  // PSD
      const QuadraticForm qf(basis, c);
      const Eigen::VectorXd x = test::random_interior_point(2, rs);
      const Eigen::VectorXd b = basis.eval(x);
      double expected = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) expected += c(i, j) * b[i] * b[j];
      CHECK(qf.eval(x) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("boundary input is rejected") {
    const QuadraticForm qf(BetaBasis::constant(1, 1), Eigen::MatrixXd::Ones(1, 1));
    CHECK_THROWS_AS(qf.eval(vec({1.0})), std::domain_error);
  }
  SUBCASE("PSD forms are non-negative at random points") {
    RngStream rs(37, 0);
    const BetaBasis basis = test::random_basis(4, 1, rs);
    const Eigen::MatrixXd a = test::random_matrix(4, 4, rs);
    const QuadraticForm qf(basis, a.transpose() * a);
    for (int i = 0; i < 1000; ++i) {
      CHECK(qf.eval(test::random_interior_point(1, rs)) >= -1e-12);
    }
  }
}

TEST_CASE("integrate_form") {
  SUBCASE("unit coefficient on the constant basis") {
    const QuadraticForm qf(BetaBasis::constant(1, 1), Eigen::MatrixXd::Ones(1, 1));
    CHECK(qf.integrate() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("identity on (1,1),(2,1) rows gives 4/3") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1.0, 2.0;
    b << 1.0, 1.0;
    const QuadraticForm qf(BetaBasis(a, b), Eigen::MatrixXd::Identity(2, 2));
    CHECK(qf.integrate() == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("matches quadrature for random PSD coefficients") {
    RngStream rs(41, 0);
    for (int trial = 0; trial < 10; ++trial) {
      const BetaBasis basis = test::random_integer_basis(3, 2, rs);
      const Eigen::MatrixXd m = test::random_matrix(3, 3, rs);
      const QuadraticForm qf(basis, m.transpose() * m);
      const double quad =
          quadrature_oracle([&](const Eigen::VectorXd& x) { return qf.eval(x); }, 2, 24);
      CHECK(qf.integrate() == doctest::Approx(quad).epsilon(1e-9));
    }
  }
}

TEST_CASE("integrate_out_dependent") {
  SUBCASE("constant psi leaves the coefficients unchanged") {
    RngStream rs(43, 0);
    const BetaBasis phi = test::random_basis(3, 1, rs);
    const BetaBasis psi = BetaBasis::constant(3, 1);
    const Eigen::MatrixXd m = test::random_matrix(3, 3, rs);
    const PsdFactor q{m};
    const QuadraticForm out = integrate_out_dependent(q, phi, psi);
    CHECK((out.coeff() - q.gram()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("single-kernel example integrates to a constant form") {
    const BetaBasis phi = BetaBasis::constant(1, 1);
    const BetaBasis psi(Eigen::MatrixXd::Constant(1, 1, 2.0),
                        Eigen::MatrixXd::Constant(1, 1, 1.0));
    const PsdFactor q{Eigen::MatrixXd::Constant(1, 1, std::sqrt(3.0))};
    const QuadraticForm out = integrate_out_dependent(q, phi, psi);
    CHECK(out.eval(vec({0.42})) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("Schur product of Gram and Q stays PSD") {
    RngStream rs(47, 0);
    for (int trial = 0; trial < 50; ++trial) {
      const BetaBasis phi = test::random_basis(4, 1, rs);
      const BetaBasis psi = test::random_basis(4, 1, rs);
      const Eigen::MatrixXd m = test::random_matrix(4, 4, rs);
      const QuadraticForm out = integrate_out_dependent(PsdFactor{m}, phi, psi);
      CHECK(min_eigenvalue(out.coeff()) >= -1e-10);
    }
  }
  SUBCASE("end to end: marginalized form matches the 2d double integral") {
    RngStream rs(53, 0);
    const BetaBasis phi = test::random_integer_basis(2, 1, rs);
    const BetaBasis psi = test::random_integer_basis(2, 1, rs);
    const Eigen::MatrixXd m = test::random_matrix(2, 2, rs);
    const PsdFactor q{m};
    const QuadraticForm marginal = integrate_out_dependent(q, phi, psi);
    // Joint form value at (x, y) with the separable product basis.
    const auto joint = [&](const Eigen::VectorXd& xy) {
      const Eigen::VectorXd z = phi.eval(xy.head(1)).cwiseProduct(psi.eval(xy.tail(1)));
      return z.dot(q.gram() * z);
    };
    const double expected = quadrature_oracle(joint, 2, 24);
    CHECK(marginal.integrate() == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("symmetric_eigen") {
  SUBCASE("identity") {
    const SymmetricEigen se = symmetric_eigen(Eigen::MatrixXd::Identity(3, 3));
    CHECK((se.values.array() - 1.0).abs().maxCoeff() < 1e-14);
  }
  SUBCASE("diagonal matrix in ascending order") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m.diagonal() << 3.0, 1.0, 2.0;
    const SymmetricEigen se = symmetric_eigen(m);
    CHECK(se.values[0] == doctest::Approx(1.0));
    CHECK(se.values[1] == doctest::Approx(2.0));
    CHECK(se.values[2] == doctest::Approx(3.0));
  }
  SUBCASE("reconstruction and orthonormality for random matrices") {
    RngStream rs(59, 0);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::MatrixXd a = test::random_matrix(8, 8, rs);
      const Eigen::MatrixXd m = 0.5 * (a + a.transpose());
      const SymmetricEigen se = symmetric_eigen(m);
      const Eigen::MatrixXd rec = se.vectors * se.values.asDiagonal() * se.vectors.transpose();
      CHECK((rec - m).norm() <= 1e-9 * std::max(1.0, m.norm()));
      CHECK((se.vectors.transpose() * se.vectors - Eigen::MatrixXd::Identity(8, 8))
                .cwiseAbs()
                .maxCoeff() < 1e-10);
    }
  }
  SUBCASE("non-symmetric input violates the contract") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 2.0, 0.0, 1.0;
    CHECK_THROWS_AS(symmetric_eigen(m), std::invalid_argument);
  }
}

TEST_CASE("general_real_eigen") {
  SUBCASE("identity has all-unit eigenvalues") {
    const GeneralEigen ge = general_real_eigen(Eigen::MatrixXd::Identity(4, 4));
    for (int i = 0; i < 4; ++i) {
      CHECK(ge.values[i].real() == doctest::Approx(1.0));
      CHECK(ge.values[i].imag() == doctest::Approx(0.0));
    }
  }
  SUBCASE("diagonal example") {
    Eigen::MatrixXd m(2, 2);
    m << 2.0, 0.0, 0.0, -1.0;
    const GeneralEigen ge = general_real_eigen(m);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 2; ++i) {
      lo = std::min(lo, ge.values[i].real());
      hi = std::max(hi, ge.values[i].real());
    }
    CHECK(lo == doctest::Approx(-1.0));
    CHECK(hi == doctest::Approx(2.0));
  }
  SUBCASE("residuals for random matrices") {
    RngStream rs(61, 0);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::MatrixXd m = test::random_matrix(9, 9, rs);
      const GeneralEigen ge = general_real_eigen(m);
      for (int i = 0; i < 9; ++i) {
        const Eigen::VectorXcd v = ge.vectors.col(i);
        const double resid = (m * v - ge.values[i] * v).norm();
        CHECK(resid <= 1e-8 * std::max(1.0, m.norm()) * v.norm());
      }
    }
  }
}

TEST_CASE("log_det_pd") {
  SUBCASE("identity") { CHECK(*log_det_pd(Eigen::MatrixXd::Identity(5, 5)) == 0.0); }
  SUBCASE("diag(e, e)") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m.diagonal().setConstant(std::exp(1.0));
    CHECK(*log_det_pd(m) == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("not PD is a signal, not an error") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    m(1, 1) = -1.0;
    CHECK(!log_det_pd(m).has_value());
  }
  SUBCASE("matches the eigenvalue sum for random PD matrices") {
    RngStream rs(67, 0);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd a = test::random_matrix(6, 6, rs);
      const Eigen::MatrixXd m = a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(6, 6);
      const SymmetricEigen se = symmetric_eigen(m);
      CHECK(*log_det_pd(m) == doctest::Approx(se.values.array().log().sum()).epsilon(1e-9));
    }
  }
}

TEST_CASE("quadratic form serialization uses the upper triangle") {
  RngStream rs(71, 0);
  const BetaBasis basis = test::random_basis(3, 1, rs);
  const Eigen::MatrixXd a = test::random_matrix(3, 3, rs);
  const QuadraticForm qf(basis, a.transpose() * a);
  const nlohmann::json j = qf.to_json("phi");
  CHECK(j.at("basis_id") == "phi");
  const Eigen::MatrixXd back = QuadraticForm::coeff_from_json(j, 3);
  CHECK((back - qf.coeff()).cwiseAbs().maxCoeff() < 1e-18);
}
