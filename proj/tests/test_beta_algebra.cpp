#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "sosmp/algebra.hpp"
#include "sosmp/beta_basis.hpp"
#include "sosmp/linalg.hpp"
#include "sosmp/quadrature.hpp"
#include "sosmp/special_functions.hpp"
#include "support/test_util.hpp"

using namespace sosmp;
using test::vec;

TEST_CASE("quadrature oracle sanity") {
  CHECK(quadrature_oracle([](const Eigen::VectorXd&) { return 1.0; }, 1, 8) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(quadrature_oracle([](const Eigen::VectorXd& x) { return x[0] * (1 - x[0]); }, 1,
                                   16) -
                 1.0 / 6.0) < 1e-14);
  CHECK(std::abs(quadrature_oracle(
                     [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[1] * x[1]; }, 2, 16) -
                 1.0 / 9.0) < 1e-12);
  CHECK_THROWS_AS(quadrature_oracle([](const Eigen::VectorXd&) { return 1.0; }, 4, 8),
                  std::invalid_argument);
}

TEST_CASE("basis evaluation") {
  SUBCASE("constant basis is identically one") {
    const BetaBasis b = BetaBasis::constant(1, 3);
    CHECK(b.eval(vec({0.2, 0.5, 0.9}))[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("alpha=2, beta=1 in 1d is the identity kernel") {
    const BetaBasis b(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0));
    CHECK(b.eval(vec({0.5}))[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("2d kernel equals the product of 1d kernels") {
    Eigen::MatrixXd a(1, 2), be(1, 2);
    a << 2.0, 3.0;
    be << 2.0, 1.0;
    const BetaBasis b(a, be);
    const double x1 = 0.5, x2 = 0.5;
    const double expected = std::pow(x1, 1.0) * std::pow(1 - x1, 1.0) * std::pow(x2, 2.0);
    CHECK(b.eval(vec({x1, x2}))[0] == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("boundary points are rejected") {
    const BetaBasis b = BetaBasis::constant(1, 1);
    CHECK_THROWS_AS(b.eval(vec({0.0})), std::domain_error);
    CHECK_THROWS_AS(b.eval(vec({1.0})), std::domain_error);
  }
  SUBCASE("log evaluation matches direct evaluation") {
    RngStream rs(7, 0);
    const BetaBasis b = test::random_basis(4, 2, rs);
    const Eigen::VectorXd x = test::random_interior_point(2, rs);
    const Eigen::VectorXd direct = b.eval(x);
    const Eigen::VectorXd logs = b.eval_log(x);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::log(direct[i]) == doctest::Approx(logs[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("kernel integral closed form") {
  SUBCASE("integral of one") {
    CHECK(kernel_integral({vec({0.0, 0.0}), vec({0.0, 0.0})}) == 1.0);
  }
  SUBCASE("x(1-x) integrates to 1/6") {
    CHECK(kernel_integral({vec({1.0}), vec({1.0})}) ==
          doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  }
  SUBCASE("x^2 over one of two dims integrates to 1/3") {
    CHECK(kernel_integral({vec({2.0, 0.0}), vec({0.0, 0.0})}) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("divergent exponent is rejected") {
    CHECK_THROWS_AS(kernel_integral({vec({-1.0}), vec({0.0})}), std::domain_error);
  }
  SUBCASE("matches quadrature for real exponents") {
    RngStream rs(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
      const double a = 6.0 * rs.next_u01();
      const double b = 6.0 * rs.next_u01();
      const double exact = kernel_integral({vec({a}), vec({b})});
      const double quad = quadrature_oracle(
          [&](const Eigen::VectorXd& x) {
            return std::pow(x[0], a) * std::pow(1 - x[0], b);
          },
          1, 400);
      CHECK(std::abs(exact - quad) < 1e-6);
    }
  }
  SUBCASE("matches quadrature exactly for integer exponents up to 12") {
    RngStream rs(4, 0);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd a = vec({double(rs.next_uint(13)), double(rs.next_uint(13))});
      const Eigen::VectorXd b = vec({double(rs.next_uint(13)), double(rs.next_uint(13))});
      const double exact = kernel_integral({a, b});
      const double quad = quadrature_oracle(
          [&](const Eigen::VectorXd& x) {
            return std::pow(x[0], a[0]) * std::pow(1 - x[0], b[0]) * std::pow(x[1], a[1]) *
                   std::pow(1 - x[1], b[1]);
          },
          2, 16);
      CHECK(std::abs(exact - quad) < 1e-10);
    }
  }
}

TEST_CASE("gram matrix") {
  SUBCASE("all-constant basis gives the all-ones matrix") {
    const Eigen::MatrixXd gamma = gram_matrix(BetaBasis::constant(3, 2));
    CHECK((gamma - Eigen::MatrixXd::Ones(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("frozen constant row entries are exactly one") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1.0, 1.0;
    b << 1.0, 1.0;
    const BetaBasis basis(a, b, 0);
    const Eigen::MatrixXd gamma = gram_matrix(basis);
    CHECK(gamma(0, 0) == 1.0);
  }
  SUBCASE("two-function 1d example") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1.0, 2.0;
    b << 1.0, 1.0;
    const Eigen::MatrixXd gamma = gram_matrix(BetaBasis(a, b));
    CHECK(gamma(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(gamma(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(gamma(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("PSD for 100 random admissible bases") {
    RngStream rs(11, 0);
    for (int trial = 0; trial < 100; ++trial) {
      const BetaBasis basis = test::random_basis(2 + trial % 5, 1 + trial % 3, rs, 1.0, 8.0);
      CHECK(min_eigenvalue(gram_matrix(basis)) >= -1e-10);
    }
  }
}

TEST_CASE("cross moment tensor") {
  SUBCASE("all-constant bases give the all-ones tensor") {
    const auto t = cross_moment_tensor(BetaBasis::constant(2, 1), BetaBasis::constant(2, 1));
    CHECK((t.matrix() - Eigen::MatrixXd::Ones(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single quartic entry") {
    const BetaBasis k(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0));
    const auto t = cross_moment_tensor(k, k);
    CHECK(t.at(0, 0, 0, 0) == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("pair-exchange symmetries hold exactly") {
    RngStream rs(13, 0);
    const BetaBasis left = test::random_basis(3, 2, rs);
    const BetaBasis right = test::random_basis(3, 2, rs);
    const auto t = cross_moment_tensor(left, right);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) {
            CHECK(t.at(i, j, k, l) == t.at(j, i, k, l));
            CHECK(t.at(i, j, k, l) == t.at(i, j, l, k));
          }
  }
  SUBCASE("same-basis tensor is symmetric as a matrix") {
    RngStream rs(17, 0);
    const BetaBasis basis = test::random_basis(3, 1, rs);
    const auto t = cross_moment_tensor(basis, basis);
    CHECK((t.matrix() - t.matrix().transpose()).cwiseAbs().maxCoeff() < 1e-18);
  }
  SUBCASE("entries match tensorized quadrature") {
    RngStream rs(19, 0);
    const BetaBasis left = test::random_integer_basis(3, 2, rs);
    const BetaBasis right = test::random_integer_basis(3, 2, rs);
    const auto t = cross_moment_tensor(left, right);
    for (int trial = 0; trial < 20; ++trial) {
      const int i = static_cast<int>(rs.next_uint(3));
      const int j = static_cast<int>(rs.next_uint(3));
      const int k = static_cast<int>(rs.next_uint(3));
      const int l = static_cast<int>(rs.next_uint(3));
      const double quad = quadrature_oracle(
          [&](const Eigen::VectorXd& x) {
            return left.eval(x)[i] * left.eval(x)[j] * right.eval(x)[k] * right.eval(x)[l];
          },
          2, 24);
      CHECK(std::abs(t.at(i, j, k, l) - quad) < 1e-10);
    }
  }
  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(cross_moment_tensor(BetaBasis::constant(2, 1), BetaBasis::constant(2, 2)),
                    std::invalid_argument);
  }
}

TEST_CASE("multiplicative closure") {
  RngStream rs(23, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const BetaBasis basis = test::random_basis(4, 2, rs);
    const int i = static_cast<int>(rs.next_uint(4));
    const int j = static_cast<int>(rs.next_uint(4));
    const ExponentVector prod = basis.pair_exponents(i, j);
    const Eigen::VectorXd x = test::random_interior_point(2, rs);
    const Eigen::VectorXd vals = basis.eval(x);
    double kernel = 1.0;
    for (int m = 0; m < 2; ++m) {
      kernel *= std::pow(x[m], prod.a[m]) * std::pow(1 - x[m], prod.b[m]);
    }
    CHECK(kernel == doctest::Approx(vals[i] * vals[j]).epsilon(1e-12));
  }
}

TEST_CASE("basis serialization round trip") {
  RngStream rs(29, 0);
  const BetaBasis basis = test::random_basis(3, 2, rs, 1.0, 30.0);
  const BetaBasis back = BetaBasis::from_json(basis.to_json());
  CHECK(back.same_shape_as(basis));
  CHECK(!back.frozen_constant().has_value());

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const BetaBasis frozen(ones, ones, 1);
  const BetaBasis frozen_back = BetaBasis::from_json(frozen.to_json());
  REQUIRE(frozen_back.frozen_constant().has_value());
  CHECK(*frozen_back.frozen_constant() == 1);
}

TEST_CASE("special functions") {
  SUBCASE("digamma matches the log-gamma slope") {
    for (const double x : {0.7, 1.0, 2.5, 9.0, 40.0, 400.0}) {
      const double h = 1e-6 * std::max(1.0, x);
      const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
      CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
  SUBCASE("inverse normal CDF round trip") {
    for (const double p : {1e-12, 1e-6, 0.02425, 0.3, 0.5, 0.97, 1 - 1e-9}) {
      CHECK(norm_cdf(inv_norm_cdf(p)) == doctest::Approx(p).epsilon(1e-12));
    }
  }
}
