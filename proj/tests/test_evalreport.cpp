#include <doctest.h>

#include "hypermol/evalreport.hpp"
#include "hypermol/phantom.hpp"
#include "oracles.hpp"

using namespace hypermol;

TEST_SUITE_BEGIN("evalreport");

TEST_CASE("spearman_abs") {
  SUBCASE("perfect and monotone-warped agreement give 1") {
    std::vector<std::pair<double, double>> id, warped;
    for (int i = 0; i < 50; ++i) {
      double t = (i + 0.5) / 50;
      id.emplace_back(t, t);
      warped.emplace_back(t, 1.0 - t * t * t);
    }
    CHECK(spearman_abs(id) == doctest::Approx(1.0));
    CHECK(spearman_abs(warped) == doctest::Approx(1.0));
  }

  SUBCASE("invariant under random strictly monotone maps") {
    std::mt19937_64 gen(3);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 200; ++i)
      pairs.emplace_back(uniform01(gen), uniform01(gen));
    double base = spearman_abs(pairs);
    auto mapped = pairs;
    for (auto& [x, y] : mapped) {
      x = std::exp(3.0 * x);          // strictly increasing
      y = 1.0 / (1.0 + std::exp(y));  // strictly decreasing
    }
    CHECK(spearman_abs(mapped) == doctest::Approx(base).epsilon(1e-12));
  }

  SUBCASE("independent pairs have small correlation") {
    std::mt19937_64 gen(5);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 1000; ++i)
      pairs.emplace_back(uniform01(gen), uniform01(gen));
    CHECK(spearman_abs(pairs) < 0.1);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(spearman_abs({{0, 0}, {1, 1}}), std::invalid_argument);
    std::vector<std::pair<double, double>> constant;
    for (int i = 0; i < 10; ++i) constant.emplace_back(0.5, i * 0.1);
    CHECK_THROWS_AS(spearman_abs(constant), std::invalid_argument);
  }
}

TEST_CASE("shell_correlation") {
  ShellGrid grid = make_shell_grid(8, kPi, 9);
  std::mt19937_64 gen(7);
  VolumeShellCoeffs a = VolumeShellCoeffs::zeros(grid);
  for (auto& sh : a.shells)
    for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));

  SUBCASE("self gives +1, negation gives -1") {
    std::vector<double> self = shell_correlation(a, a);
    for (double c : self) CHECK(c == doctest::Approx(1.0).epsilon(1e-14));
    VolumeShellCoeffs neg = a;
    for (auto& sh : neg.shells)
      for (auto& v : sh.a) v = -v;
    for (double c : shell_correlation(a, neg))
      CHECK(c == doctest::Approx(-1.0).epsilon(1e-14));
  }

  SUBCASE("independent random shells decorrelate like 1/sqrt(d)") {
    // shell 8 has (9+1)^2 = 100 coefficients; |corr| is typically <= 3/sqrt(d)
    int hits = 0, total = 0;
    for (int rep = 0; rep < 20; ++rep) {
      VolumeShellCoeffs b = VolumeShellCoeffs::zeros(grid);
      for (auto& sh : b.shells)
        for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));
      std::vector<double> c = shell_correlation(a, b);
      for (int k = 6; k <= 8; ++k) {
        double d = static_cast<double>(grid.shell_size(k));
        if (std::fabs(c[k - 1]) <= 3.0 / std::sqrt(d)) ++hits;
        ++total;
      }
    }
    CHECK(hits >= total - 3);
  }

  SUBCASE("zero shell is reported as NaN") {
    VolumeShellCoeffs z = VolumeShellCoeffs::zeros(grid);
    std::vector<double> c = shell_correlation(a, z);
    for (double v : c) CHECK(std::isnan(v));
  }

  SUBCASE("invariant under a simultaneous rotation of both volumes") {
    VolumeShellCoeffs b = VolumeShellCoeffs::zeros(grid);
    for (auto& sh : b.shells)
      for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));
    Rotation R = random_rotation(gen);
    VolumeShellCoeffs ar = a, br = b;
    for (int k = 1; k <= 8; ++k) {
      ar.shells[k - 1] = rotate_sh(a.shells[k - 1], R);
      br.shells[k - 1] = rotate_sh(b.shells[k - 1], R);
    }
    std::vector<double> c0 = shell_correlation(a, b);
    std::vector<double> c1 = shell_correlation(ar, br);
    for (int k = 0; k < 8; ++k)
      CHECK(c1[k] == doctest::Approx(c0[k]).epsilon(1e-10));
  }
}

TEST_CASE("align_global") {
  ShellGrid grid = make_shell_grid(6, kPi, 7);
  ParamBasisSpec basis{ParamBasisKind::legendre, 2};
  HyperVolumeCoeffs A = phantom_to_hypervolume(cat_preset(), grid, basis);
  std::vector<double> ts = {0.1, 0.3, 0.5, 0.7, 0.9};

  SUBCASE("identical volumes align at the identity with ~zero residual") {
    AlignResult ar = align_global(A, A, ts, 2);
    CHECK(ar.residual < 1e-10);
    CHECK_FALSE(ar.reflected);
    CHECK_FALSE(ar.flipped_t);
    Mat3 m = ar.g.matrix();
    for (int i = 0; i < 9; ++i)
      CHECK(std::fabs(m[i] - (i % 4 == 0 ? 1.0 : 0.0)) < 1e-6);
  }

  SUBCASE("recovers a planted rotation within 0.02 rad") {
    std::mt19937_64 gen(11);
    Rotation G0 = random_rotation(gen);
    HyperVolumeCoeffs B = rotate_hypervolume(A, G0);
    AlignResult ar = align_global(A, B, ts, 2);
    CHECK_FALSE(ar.reflected);
    // angular distance between recovered and planted rotation
    Mat3 diff = mat3_mul(ar.g.matrix(), mat3_transpose(G0.matrix()));
    double trace = diff[0] + diff[4] + diff[8];
    double ang = std::acos(std::clamp(0.5 * (trace - 1.0), -1.0, 1.0));
    CHECK(ang < 0.02);
  }

  SUBCASE("detects a reflected copy") {
    HyperVolumeCoeffs B = A;
    for (int q = 0; q <= 2; ++q)
      for (int k = 1; k <= 6; ++k)
        for (int n = 1; n <= grid.band(k); n += 2)
          for (int m = -n; m <= n; ++m) B.at(q, k, n, m) = -B.at(q, k, n, m);
    AlignResult ar = align_global(A, B, ts, 2);
    CHECK(ar.reflected);
    CHECK(ar.residual < 1e-8);
  }

  SUBCASE("detects a t-flip") {
    // B(t) = A(1-t): odd-q legendre coefficients change sign
    HyperVolumeCoeffs B = A;
    for (int q = 1; q <= 2; q += 2) {
      cplx* slice = B.data.data() + q * grid.slice_size();
      for (std::size_t i = 0; i < grid.slice_size(); ++i) slice[i] = -slice[i];
      B.dc[q] = -B.dc[q];
    }
    AlignResult ar = align_global(A, B, ts, 2);
    CHECK(ar.flipped_t);
    CHECK(ar.residual < 1e-8);
  }

  SUBCASE("residual is invariant when both inputs rotate together") {
    std::mt19937_64 gen(13);
    Rotation G0 = random_rotation(gen), C = random_rotation(gen);
    HyperVolumeCoeffs B = rotate_hypervolume(A, G0);
    AlignResult r0 = align_global(A, B, ts, 2);
    AlignResult r1 = align_global(rotate_hypervolume(A, C),
                                  rotate_hypervolume(B, C), ts, 2);
    CHECK(r1.residual == doctest::Approx(r0.residual).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("degenerate_param_detector") {
  std::mt19937_64 gen(17);

  SUBCASE("uniform samples are not flagged") {
    std::vector<double> t(5000);
    for (auto& v : t) v = uniform01(gen);
    DetectorResult r = degenerate_param_detector(t);
    CHECK_FALSE(r.flagged);
    CHECK(r.used_range > 0.9);
  }

  SUBCASE("all mass at the endpoints is flagged with ~zero used range") {
    std::vector<double> t(2000);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (i % 2) ? 0.0 : 1.0;
    DetectorResult r = degenerate_param_detector(t);
    CHECK(r.flagged);
    CHECK(r.p_value < 1e-3);
    // two occupied bins out of 20: the bin-resolution floor
    CHECK(r.used_range <= 0.1);
  }

  SUBCASE("extreme-points mapping (most mass in the outer bins) is flagged") {
    std::vector<double> t;
    for (int i = 0; i < 5000; ++i) {
      double u = uniform01(gen);
      if (u < 0.4)
        t.push_back(0.02 * uniform01(gen));
      else if (u < 0.8)
        t.push_back(0.98 + 0.02 * uniform01(gen));
      else
        t.push_back(uniform01(gen));
    }
    DetectorResult r = degenerate_param_detector(t);
    CHECK(r.flagged);
  }

  SUBCASE("partial-range mapping is flagged with a small used range") {
    std::vector<double> t(5000);
    for (auto& v : t) v = 0.30 + 0.25 * uniform01(gen);
    DetectorResult r = degenerate_param_detector(t);
    CHECK(r.flagged);
    CHECK(r.used_range < 0.35);
  }

  SUBCASE("needs at least 100 samples") {
    std::vector<double> t(99, 0.5);
    CHECK_THROWS_AS(degenerate_param_detector(t), std::invalid_argument);
  }
}

TEST_CASE("chi-square tail matches reference values") {
  // pinned against an independent implementation of the chi-square sf
  CHECK(chi2_sf(31.41, 19) == doctest::Approx(0.036379431676840).epsilon(1e-10));
  CHECK(chi2_sf(43.82, 19) == doctest::Approx(0.0010000623145601).epsilon(1e-9));
  CHECK(chi2_sf(10.0, 19) == doctest::Approx(0.9529457975866219).epsilon(1e-10));
  CHECK(chi2_sf(50.0, 19) == doctest::Approx(0.0001310611647931629).epsilon(1e-9));
  CHECK(chi2_sf(5.0, 3) == doctest::Approx(0.1717971442967335).epsilon(1e-10));
}

TEST_CASE("build_param_mapping") {
  std::vector<double> tt = {0.1, 0.4, 0.9}, te = {0.2, 0.5, 0.8};
  ParamMapping m = build_param_mapping(tt, te, 10);
  CHECK(m.pairs.size() == 3);
  int total = 0;
  for (int c : m.histogram) total += c;
  CHECK(total == 3);
  CHECK(m.histogram[2] == 1);
  CHECK(m.histogram[5] == 1);
  CHECK(m.histogram[8] == 1);
  CHECK_THROWS_AS(build_param_mapping({0.1}, {0.1, 0.2}), std::invalid_argument);
}

TEST_SUITE_END();
