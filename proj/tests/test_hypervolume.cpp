#include <doctest.h>

#include "hypermol/hypervolume.hpp"
#include "hypermol/phantom.hpp"
#include "oracles.hpp"

using namespace hypermol;

TEST_SUITE_BEGIN("hypervolume");

TEST_CASE("default_band_schedule") {
  CHECK(default_band_schedule(4, 10) == std::vector<int>{2, 3, 4, 5});
  CHECK(default_band_schedule(4, 3) == std::vector<int>{2, 3, 3, 3});
  CHECK_THROWS_AS(default_band_schedule(0, 3), std::invalid_argument);
}

TEST_CASE("tensor_flat_index layout") {
  ShellGrid grid = make_shell_grid(3, kPi, 8);  // p = [2,3,4]
  ParamBasisSpec basis{ParamBasisKind::legendre, 2};

  CHECK(tensor_flat_index(0, 1, 0, 0, grid, basis) == 0);
  CHECK(tensor_flat_index(0, 1, 1, -1, grid, basis) == 1);
  // q stride is sum_k (p(k)+1)^2 = 9 + 16 + 25
  CHECK(tensor_flat_index(1, 1, 0, 0, grid, basis) == 50);
  CHECK(grid.slice_size() == 50);

  // bijective onto 0..len-1
  std::vector<int> seen(3 * 50, 0);
  for (int q = 0; q <= 2; ++q)
    for (int k = 1; k <= 3; ++k)
      for (int n = 0; n <= grid.band(k); ++n)
        for (int m = -n; m <= n; ++m)
          ++seen[tensor_flat_index(q, k, n, m, grid, basis)];
  for (int c : seen) CHECK(c == 1);

  CHECK_THROWS_AS(tensor_flat_index(3, 1, 0, 0, grid, basis), std::out_of_range);
  CHECK_THROWS_AS(tensor_flat_index(0, 4, 0, 0, grid, basis), std::out_of_range);
  CHECK_THROWS_AS(tensor_flat_index(0, 1, 3, 0, grid, basis), std::out_of_range);
  CHECK_THROWS_AS(tensor_flat_index(0, 1, 1, 2, grid, basis), std::out_of_range);
}

TEST_CASE("instance_at") {
  ShellGrid grid = make_shell_grid(3, kPi, 6);
  std::mt19937_64 gen(17);

  SUBCASE("Q = 0 output is t-independent") {
    ParamBasisSpec basis{ParamBasisKind::legendre, 0};
    HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
    for (auto& v : hv.data) v = cplx(normal01(gen), normal01(gen));
    VolumeShellCoeffs a = instance_at(hv, 0.1), b = instance_at(hv, 0.9);
    for (int k = 1; k <= 3; ++k)
      for (std::size_t i = 0; i < a.shells[k - 1].size(); ++i)
        CHECK(a.shells[k - 1].a[i] == b.shells[k - 1].a[i]);
  }

  SUBCASE("pure q=1 legendre component vanishes at t = 0.5") {
    ParamBasisSpec basis{ParamBasisKind::legendre, 1};
    HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
    for (int k = 1; k <= 3; ++k)
      for (int n = 0; n <= grid.band(k); ++n)
        for (int m = -n; m <= n; ++m)
          hv.at(1, k, n, m) = cplx(normal01(gen), normal01(gen));
    VolumeShellCoeffs mid = instance_at(hv, 0.5);
    for (int k = 1; k <= 3; ++k)
      for (std::size_t i = 0; i < mid.shells[k - 1].size(); ++i)
        CHECK(std::abs(mid.shells[k - 1].a[i]) < 1e-15);
  }

  SUBCASE("linearity is exact") {
    ParamBasisSpec basis{ParamBasisKind::legendre, 2};
    HyperVolumeCoeffs h1 = HyperVolumeCoeffs::zeros(grid, basis);
    HyperVolumeCoeffs h2 = HyperVolumeCoeffs::zeros(grid, basis);
    for (auto& v : h1.data) v = cplx(normal01(gen), normal01(gen));
    for (auto& v : h2.data) v = cplx(normal01(gen), normal01(gen));
    const double a = 0.375, b = -1.25;  // exactly representable
    HyperVolumeCoeffs comb = HyperVolumeCoeffs::zeros(grid, basis);
    for (std::size_t i = 0; i < comb.data.size(); ++i)
      comb.data[i] = a * h1.data[i] + b * h2.data[i];
    VolumeShellCoeffs vc = instance_at(comb, 0.3);
    VolumeShellCoeffs v1 = instance_at(h1, 0.3), v2 = instance_at(h2, 0.3);
    for (int k = 1; k <= 3; ++k)
      for (std::size_t i = 0; i < vc.shells[k - 1].size(); ++i)
        CHECK(std::abs(vc.shells[k - 1].a[i] -
                       (a * v1.shells[k - 1].a[i] + b * v2.shells[k - 1].a[i])) <
              1e-14);
  }

  SUBCASE("uniform-t mean equals the q=0 slice (legendre orthonormality)") {
    ParamBasisSpec basis{ParamBasisKind::legendre, 3};
    HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
    for (auto& v : hv.data) v = cplx(normal01(gen), normal01(gen));
    Quadrature1D tq = gauss_legendre_01(8);
    std::vector<cplx> mean(grid.slice_size(), cplx(0, 0));
    for (int i = 0; i < tq.n(); ++i) {
      VolumeShellCoeffs inst = instance_at(hv, tq.x[i]);
      std::size_t off = 0;
      for (int k = 1; k <= 3; ++k) {
        for (std::size_t j = 0; j < inst.shells[k - 1].size(); ++j)
          mean[off + j] += tq.w[i] * inst.shells[k - 1].a[j];
        off += inst.shells[k - 1].size();
      }
    }
    for (std::size_t j = 0; j < mean.size(); ++j)
      CHECK(std::abs(mean[j] - hv.data[j]) < 1e-12);
  }

  SUBCASE("t out of range") {
    ParamBasisSpec basis{ParamBasisKind::legendre, 0};
    HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
    CHECK_THROWS_AS(instance_at(hv, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(instance_at(hv, 1.01), std::invalid_argument);
  }
}

TEST_CASE("synthesize_grid: zero coefficients give a zero grid") {
  ShellGrid grid = make_shell_grid(4, kPi, 5);
  VolumeShellCoeffs vol = VolumeShellCoeffs::zeros(grid);
  for (auto mode : {SynthesisMode::direct, SynthesisMode::accelerated}) {
    SynthesisResult r = synthesize_grid(vol, 9, mode, 2);
    for (double v : r.values) CHECK(v == 0.0);
  }
}

TEST_CASE("synthesize_grid: centered Gaussian matches the analytic density") {
  // single blob at the origin: F is radial, f(x) = a exp(-|x|^2 / (2 sigma^2))
  GaussianBlobPhantom ph;
  GaussianBlob b;
  b.amplitude = 1.0;
  b.sigma = 0.07;
  ph.blobs = {b};

  const int N = 33, K = 16;
  ShellGrid grid = make_shell_grid(K, kPi, K + 1);
  VolumeShellCoeffs vol = phantom_to_shells(ph, 0.0, grid);
  SynthesisResult r = synthesize_grid(vol, N, SynthesisMode::accelerated, 2);

  double num = 0, den = 0;
  for (int zi = 0; zi < N; ++zi)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        double x = (i - 0.5 * (N - 1)) / N, y = (j - 0.5 * (N - 1)) / N,
               z = (zi - 0.5 * (N - 1)) / N;
        double want = std::exp(-(x * x + y * y + z * z) / (2 * 0.07 * 0.07));
        double got = r.values[(static_cast<std::size_t>(zi) * N + j) * N + i];
        num += (got - want) * (got - want);
        den += want * want;
      }
  CHECK(std::sqrt(num / den) < 0.03);
  CHECK(r.imag_residual < 1e-8);
}

TEST_CASE("synthesize_grid: direct and accelerated modes agree") {
  std::mt19937_64 gen(23);
  ShellGrid grid = make_shell_grid(8, kPi, 9);
  VolumeShellCoeffs vol = VolumeShellCoeffs::zeros(grid);
  vol.dc = 0.4;
  for (auto& sh : vol.shells)
    for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));

  const int N = 17;
  SynthesisResult a = synthesize_grid(vol, N, SynthesisMode::direct, 2);
  SynthesisResult b = synthesize_grid(vol, N, SynthesisMode::accelerated, 2);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    num += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    den += b.values[i] * b.values[i];
  }
  CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("synthesize_grid is linear in the volume") {
  std::mt19937_64 gen(29);
  ShellGrid grid = make_shell_grid(4, kPi, 5);
  VolumeShellCoeffs v1 = VolumeShellCoeffs::zeros(grid);
  VolumeShellCoeffs v2 = VolumeShellCoeffs::zeros(grid);
  for (auto& sh : v1.shells)
    for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));
  for (auto& sh : v2.shells)
    for (auto& v : sh.a) v = cplx(normal01(gen), normal01(gen));
  VolumeShellCoeffs comb = VolumeShellCoeffs::zeros(grid);
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < comb.shells[k].size(); ++i)
      comb.shells[k].a[i] = 2.0 * v1.shells[k].a[i] - 0.5 * v2.shells[k].a[i];

  const int N = 9;
  SynthesisResult r1 = synthesize_grid(v1, N, SynthesisMode::accelerated, 1);
  SynthesisResult r2 = synthesize_grid(v2, N, SynthesisMode::accelerated, 1);
  SynthesisResult rc = synthesize_grid(comb, N, SynthesisMode::accelerated, 1);
  for (std::size_t i = 0; i < rc.values.size(); ++i)
    CHECK(rc.values[i] ==
          doctest::Approx(2.0 * r1.values[i] - 0.5 * r2.values[i])
              .epsilon(1e-10)
              .scale(1.0));
}

TEST_CASE("axpy applies in place") {
  ShellGrid grid = make_shell_grid(2, kPi, 3);
  ParamBasisSpec basis{ParamBasisKind::legendre, 1};
  HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
  std::vector<cplx> g(hv.data.size(), cplx(1, -2));
  axpy(hv, 0.5, g);
  for (const cplx& v : hv.data) CHECK(v == cplx(0.5, -1));
  std::vector<cplx> bad(3);
  CHECK_THROWS_AS(axpy(hv, 1.0, bad), std::invalid_argument);
}

TEST_SUITE_END();
