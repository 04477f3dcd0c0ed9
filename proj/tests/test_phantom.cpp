#include <doctest.h>

#include "hypermol/imaging.hpp"
#include "hypermol/phantom.hpp"
#include "oracles.hpp"

using namespace hypermol;

TEST_SUITE_BEGIN("phantom");

namespace {

GaussianBlobPhantom single_blob(double a, double sigma, Vec3 c0, Vec3 c1 = {}) {
  GaussianBlobPhantom ph;
  GaussianBlob b;
  b.amplitude = a;
  b.sigma = sigma;
  b.c0 = c0;
  b.c1 = c1;
  ph.blobs = {b};
  return ph;
}

double phantom_density(const GaussianBlobPhantom& ph, double t, Vec3 x) {
  double v = 0;
  for (const auto& b : ph.blobs) {
    Vec3 d = x - b.center(t);
    v += b.amplitude * std::exp(-d.dot(d) / (2 * b.sigma * b.sigma));
  }
  return v;
}

}  // namespace

TEST_CASE("phantom_ft closed form") {
  SUBCASE("zero frequency gives the total mass") {
    GaussianBlobPhantom ph = single_blob(1.3, 0.06, {0, 0, 0});
    cplx v = phantom_ft(ph, 0.0, {0, 0, 0});
    CHECK(v.real() ==
          doctest::Approx(1.3 * std::pow(kTwoPi, 1.5) * std::pow(0.06, 3)));
    CHECK(v.imag() == doctest::Approx(0.0));
  }

  SUBCASE("phase factor has modulus one for any center") {
    GaussianBlobPhantom centered = single_blob(0.9, 0.05, {0, 0, 0});
    GaussianBlobPhantom moved = single_blob(0.9, 0.05, {0.1, -0.07, 0.03});
    Vec3 w{12.0, -5.0, 7.0};
    CHECK(std::abs(phantom_ft(moved, 0.0, w)) ==
          doctest::Approx(std::abs(phantom_ft(centered, 0.0, w))));
  }

  SUBCASE("matches a brute-force 3-D integral") {
    GaussianBlobPhantom ph = single_blob(0.8, 0.06, {0.10, -0.05, 0.08});
    for (Vec3 w : {Vec3{7.0, -3.0, 2.0}, Vec3{0.0, 18.0, -9.0}}) {
      cplx got = phantom_ft(ph, 0.0, w);
      cplx want = oracles::fourier_integral_3d(
          [&](Vec3 x) { return phantom_density(ph, 0.0, x); }, w, 0.42, 64);
      CHECK(oracles::rel_err(got, want) < 1e-6);
    }
  }
}

TEST_CASE("phantom_projection_image") {
  const int N = 33;
  const double px = 1.0 / N;

  SUBCASE("identity rotation of a centered blob is radially symmetric") {
    GaussianBlobPhantom ph = single_blob(1.0, 0.06, {0, 0, 0});
    std::vector<double> img =
        phantom_projection_image(ph, Rotation::identity(), 0.0, N, px);
    int c = (N - 1) / 2;
    for (int d = 1; d < 10; ++d) {
      double right = img[static_cast<std::size_t>(c) * N + (c + d)];
      double up = img[static_cast<std::size_t>(c + d) * N + c];
      double left = img[static_cast<std::size_t>(c) * N + (c - d)];
      CHECK(right == doctest::Approx(up).epsilon(1e-12));
      CHECK(right == doctest::Approx(left).epsilon(1e-12));
    }
  }

  SUBCASE("image integral equals the 3-D mass for any rotation") {
    GaussianBlobPhantom ph = cat_preset();
    double mass3d = phantom_ft(ph, 0.4, {0, 0, 0}).real();
    std::mt19937_64 gen(3);
    for (int rep = 0; rep < 3; ++rep) {
      Rotation rot = random_rotation(gen);
      std::vector<double> img = phantom_projection_image(ph, rot, 0.4, 65, 1.0 / 65);
      double sum = 0;
      for (double v : img) sum += v;
      sum *= (1.0 / 65) * (1.0 / 65);
      CHECK(sum == doctest::Approx(mass3d).epsilon(1e-8));
    }
  }

  SUBCASE("matches the z-quadrature line integral of the rotated density") {
    GaussianBlobPhantom ph;
    ph.blobs = {single_blob(1.0, 0.05, {0.08, -0.02, 0.05}).blobs[0],
                single_blob(0.7, 0.07, {-0.06, 0.09, -0.04}).blobs[0]};
    std::mt19937_64 gen(5);
    Rotation rot = random_rotation(gen);
    Mat3 Rinv = mat3_transpose(rot.matrix());
    std::vector<double> img = phantom_projection_image(ph, rot, 0.0, N, px);
    const int Nz = 600;
    double num = 0, den = 0;
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        double x = (i - 0.5 * (N - 1)) * px, y = (j - 0.5 * (N - 1)) * px;
        double line = 0;
        for (int zi = 0; zi < Nz; ++zi) {
          double z = -0.75 + 1.5 * (zi + 0.5) / Nz;
          line += phantom_density(ph, 0.0, mat3_apply(Rinv, {x, y, z})) * 1.5 / Nz;
        }
        double got = img[static_cast<std::size_t>(j) * N + i];
        num += (got - line) * (got - line);
        den += line * line;
      }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("projection-slice: image DFT equals the rotated central slice") {
  GaussianBlobPhantom ph = cat_preset();
  const int N = 33, K = 12;
  const double px = 1.0 / N;
  ShellGrid grid = make_shell_grid(K, kPi, K + 1);
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 3; ++rep) {
    Rotation rot = random_rotation(gen);
    double t = uniform01(gen);
    std::vector<double> img = phantom_projection_image(ph, rot, t, N, px);
    std::vector<float> imgf(img.begin(), img.end());
    ImageCircleCoeffs dft = polar_fourier(imgf.data(), N, px, grid);

    // oracle: phantom_ft on the rotated plane, then the same angular DFT
    Mat3 Rinv = mat3_transpose(rot.matrix());
    double num = 0, den = 0;
    for (int k = 1; k <= K; ++k) {
      const int p = grid.band(k);
      const int M = 2 * p + 2;
      std::vector<cplx> ring(M);
      for (int b = 0; b < M; ++b) {
        double phi = kTwoPi * b / M;
        Vec3 w{grid.radius(k) * std::cos(phi), grid.radius(k) * std::sin(phi), 0};
        ring[b] = phantom_ft(ph, t, mat3_apply(Rinv, w));
      }
      for (int m = -p; m <= p; ++m) {
        cplx want(0, 0);
        for (int b = 0; b < M; ++b)
          want += ring[b] * std::polar(1.0, -m * (kTwoPi * b / M));
        want /= static_cast<double>(M);
        num += grid.radius(k) * std::norm(dft.at(k, m) - want);
        den += grid.radius(k) * std::norm(want);
      }
    }
    CHECK(std::sqrt(num / den) < 1e-3);
  }
}

TEST_CASE("phantom_to_hypervolume") {
  SUBCASE("static phantom has no q >= 1 content") {
    GaussianBlobPhantom ph = single_blob(1.1, 0.06, {0.05, 0.02, -0.03});
    ShellGrid grid = make_shell_grid(4, kPi, 5);
    ParamBasisSpec basis{ParamBasisKind::legendre, 3};
    HyperVolumeCoeffs hv = phantom_to_hypervolume(ph, grid, basis);
    for (int q = 1; q <= 3; ++q) {
      const cplx* slice = hv.data.data() + q * grid.slice_size();
      for (std::size_t i = 0; i < grid.slice_size(); ++i)
        CHECK(std::abs(slice[i]) < 1e-10);
      CHECK(std::fabs(hv.dc[q]) < 1e-10);
    }
  }

  SUBCASE("held-out t: instance_at matches the per-t shell projection") {
    GaussianBlobPhantom ph = single_blob(1.0, 0.07, {0.02, 0.01, -0.01},
                                         {0.06, 0.0, 0.02});
    ShellGrid grid = make_shell_grid(12, kPi, 13);
    ParamBasisSpec basis{ParamBasisKind::legendre, 8};
    HyperVolumeCoeffs hv = phantom_to_hypervolume(ph, grid, basis);
    VolumeShellCoeffs got = instance_at(hv, 0.37);
    VolumeShellCoeffs want = phantom_to_shells(ph, 0.37, grid);
    double num = 0, den = 0;
    for (int k = 1; k <= 12; ++k)
      for (std::size_t i = 0; i < want.shells[k - 1].size(); ++i) {
        num += std::norm(got.shells[k - 1].a[i] - want.shells[k - 1].a[i]);
        den += std::norm(want.shells[k - 1].a[i]);
      }
    CHECK(std::sqrt(num / den) < 1e-3);
  }

  SUBCASE("chebyshev basis is rejected for fitting") {
    ShellGrid grid = make_shell_grid(2, kPi, 3);
    CHECK_THROWS_AS(phantom_to_hypervolume(cat_preset(), grid,
                                           {ParamBasisKind::chebyshev, 2}),
                    std::invalid_argument);
  }
}

TEST_CASE("cat preset geometry and heterogeneity") {
  GaussianBlobPhantom ph = cat_preset();
  CHECK(ph.blobs.size() == 10);
  // all centers stay well inside the reconstruction ball for all t
  CHECK(ph.max_center_radius(201) < 0.45 * 1.0);
  CHECK(ph.max_center_radius(201) < 0.16);
  for (const auto& b : ph.blobs) {
    CHECK(b.amplitude > 0);
    CHECK(b.sigma >= 0.03);
    CHECK(b.sigma <= 0.08);
  }

  // fitted coefficients are finite and per-shell norms decay with k
  ShellGrid grid = make_shell_grid(12, kPi, 13);
  ParamBasisSpec basis{ParamBasisKind::legendre, 3};
  HyperVolumeCoeffs hv = phantom_to_hypervolume(ph, grid, basis);
  for (const cplx& v : hv.data) CHECK(std::isfinite(std::abs(v)));
  VolumeShellCoeffs inst = instance_at(hv, 0.5);
  std::vector<double> norms(12);
  for (int k = 1; k <= 12; ++k) {
    double n = 0;
    for (const cplx& v : inst.shells[k - 1].a) n += std::norm(v);
    norms[k - 1] = std::sqrt(n);
  }
  CHECK(norms[11] < norms[0]);
  CHECK(norms[11] < norms[3]);

  // instances at the ends are substantially different under the
  // circumference-weighted metric the matcher uses
  VolumeShellCoeffs v0 = phantom_to_shells(ph, 0.0, grid);
  VolumeShellCoeffs v1 = phantom_to_shells(ph, 1.0, grid);
  double num = 0, den = 0;
  for (int k = 1; k <= 12; ++k)
    for (std::size_t i = 0; i < v0.shells[k - 1].size(); ++i) {
      num += grid.radius(k) * std::norm(v0.shells[k - 1].a[i] - v1.shells[k - 1].a[i]);
      den += grid.radius(k) * std::norm(v0.shells[k - 1].a[i]);
    }
  CHECK(std::sqrt(num / den) > 0.15);
}

TEST_SUITE_END();
