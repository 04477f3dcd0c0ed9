#include <doctest.h>

#include "hypermol/parambasis.hpp"
#include "oracles.hpp"

using namespace hypermol;

TEST_SUITE_BEGIN("parambasis");

TEST_CASE("pinned values") {
  ParamBasisSpec leg{ParamBasisKind::legendre, 3};
  CHECK(eval_param_basis(leg, 0.42)[0] == doctest::Approx(1.0));
  CHECK(eval_param_basis(leg, 1.0)[1] == doctest::Approx(std::sqrt(3.0)));
  // Pbar_1(0.5) = 0 kills a pure q=1 component at the midpoint
  CHECK(eval_param_basis(leg, 0.5)[1] == doctest::Approx(0.0));

  ParamBasisSpec haar{ParamBasisKind::haar, 4};
  // index 3 = psi_{1,1}; 2^{1/2} phi(2*0.625 - 1) = sqrt(2)
  CHECK(eval_param_basis(haar, 0.625)[3] == doctest::Approx(std::sqrt(2.0)));
  CHECK(eval_param_basis(haar, 0.625)[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(eval_param_basis(leg, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(eval_param_basis(leg, 1.1), std::invalid_argument);
}

TEST_CASE("q = 0 is the constant function for every kind") {
  for (auto kind : {ParamBasisKind::legendre, ParamBasisKind::chebyshev,
                    ParamBasisKind::haar}) {
    ParamBasisSpec spec{kind, 5};
    for (double t : {0.0, 0.21, 0.5, 0.93, 1.0})
      CHECK(eval_param_basis(spec, t)[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("gauss_legendre_01 basics") {
  Quadrature1D q1 = gauss_legendre_01(1);
  CHECK(q1.x[0] == doctest::Approx(0.5));
  CHECK(q1.w[0] == doctest::Approx(1.0));

  Quadrature1D q8 = gauss_legendre_01(8);
  double sum = 0, cubic = 0;
  for (int i = 0; i < 8; ++i) {
    sum += q8.w[i];
    cubic += q8.w[i] * q8.x[i] * q8.x[i] * q8.x[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cubic == doctest::Approx(0.25).epsilon(1e-14));

  // exactness through degree 2n-1
  Quadrature1D q5 = gauss_legendre_01(5);
  double p9 = 0;
  for (int i = 0; i < 5; ++i) p9 += q5.w[i] * std::pow(q5.x[i], 9.0);
  CHECK(p9 == doctest::Approx(0.1).epsilon(1e-13));

  CHECK_THROWS_AS(gauss_legendre_01(0), std::invalid_argument);
}

TEST_CASE("legendre kind is orthonormal on [0,1]") {
  const int Q = 16;
  ParamBasisSpec spec{ParamBasisKind::legendre, Q};
  Quadrature1D q = gauss_legendre_01(Q + 2);
  std::vector<std::vector<double>> vals(q.n());
  for (int i = 0; i < q.n(); ++i) vals[i] = eval_param_basis(spec, q.x[i]);
  double worst = 0;
  for (int a = 0; a <= Q; ++a)
    for (int b = 0; b <= Q; ++b) {
      double g = 0;
      for (int i = 0; i < q.n(); ++i) g += q.w[i] * vals[i][a] * vals[i][b];
      worst = std::max(worst, std::fabs(g - (a == b ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("chebyshev satisfies the shifted three-term recurrence") {
  ParamBasisSpec spec{ParamBasisKind::chebyshev, 10};
  for (double t : {0.03, 0.27, 0.5, 0.64, 0.98}) {
    std::vector<double> v = eval_param_basis(spec, t);
    double x = 2 * t - 1;
    for (int q = 1; q < 10; ++q)
      CHECK(v[q + 1] == doctest::Approx(2 * x * v[q] - v[q - 1]).epsilon(1e-12));
  }
}

TEST_CASE("haar: piecewise constant on dyadic intervals, orthonormal") {
  const int Q = 6;
  ParamBasisSpec spec{ParamBasisKind::haar, Q};

  // constant on each dyadic cell of width 1/8
  for (int cell = 0; cell < 8; ++cell) {
    std::vector<double> a = eval_param_basis(spec, (cell + 0.25) / 8.0);
    std::vector<double> b = eval_param_basis(spec, (cell + 0.75) / 8.0);
    for (int q = 0; q <= Q; ++q) CHECK(a[q] == doctest::Approx(b[q]));
  }

  // exact dyadic integration: midpoints of 64 equal cells
  double worst = 0;
  const int M = 64;
  for (int qa = 0; qa <= Q; ++qa)
    for (int qb = 0; qb <= Q; ++qb) {
      double g = 0;
      for (int i = 0; i < M; ++i) {
        std::vector<double> v = eval_param_basis(spec, (i + 0.5) / M);
        g += v[qa] * v[qb] / M;
      }
      worst = std::max(worst, std::fabs(g - (qa == qb ? 1.0 : 0.0)));
    }
  CHECK(worst < 1e-14);
}

TEST_CASE("gauss_legendre_m11 nodes are symmetric and positive-weighted") {
  for (int n : {2, 3, 7, 16, 33}) {
    Quadrature1D q = gauss_legendre_m11(n);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      CHECK(q.w[i] > 0);
      CHECK(q.x[i] == doctest::Approx(-q.x[n - 1 - i]).epsilon(1e-14));
      sum += q.w[i];
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_SUITE_END();
