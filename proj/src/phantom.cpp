#include "hypermol/phantom.hpp"

namespace hypermol {

double GaussianBlobPhantom::max_center_radius(int t_steps) const {
  double r = 0.0;
  for (int i = 0; i < t_steps; ++i) {
    double t = t_steps > 1 ? static_cast<double>(i) / (t_steps - 1) : 0.0;
    for (const auto& b : blobs) r = std::max(r, b.center(t).norm());
  }
  return r;
}

GaussianBlobPhantom cat_preset() {
  auto blob = [](double a, double s, Vec3 c0, Vec3 c1 = {}, Vec3 c2 = {},
                 Vec3 c3 = {}) {
    GaussianBlob b;
    b.amplitude = a;
    b.sigma = s;
    b.c0 = c0;
    b.c1 = c1;
    b.c2 = c2;
    b.c3 = c3;
    return b;
  };
  GaussianBlobPhantom ph;
  ph.blobs = {
      // body
      blob(1.6, 0.065, {0, 0, -0.040}),
      blob(1.3, 0.055, {0, 0.015, 0.030}),
      blob(1.1, 0.052, {0, 0.060, -0.030}, {0, -0.030, 0}),
      // head with a slight sway
      blob(1.2, 0.050, {0, -0.010, 0.095}, {0.025, 0, 0}),
      // ears tilting in opposite phases
      blob(0.9, 0.042, {-0.050, 0.010, 0.105}, {-0.060, 0, 0.020}, {0, 0, -0.045}),
      blob(0.9, 0.042, {0.050, -0.010, 0.105}, {0.030, 0, 0.015}, {0.030, 0, -0.030}),
      // front paws curling
      blob(1.0, 0.046, {-0.045, -0.090, -0.100}, {0, 0.045, 0.030}),
      blob(1.0, 0.046, {0.045, -0.090, -0.100}, {0, -0.030, 0}, {0, 0.030, 0}),
      // tail, swinging hardest at the tip
      blob(0.8, 0.044, {0.015, -0.100, -0.055}, {0.080, 0.025, 0.060},
           {-0.040, 0, -0.025}),
      blob(0.8, 0.042, {0.020, -0.115, -0.020}, {0.110, 0.060, 0.070},
           {-0.060, 0, -0.035}, {0, 0, -0.060}),
  };
  return ph;
}

cplx phantom_ft(const GaussianBlobPhantom& ph, double t, const Vec3& omega) {
  const double w2 = omega.dot(omega);
  cplx sum(0, 0);
  for (const auto& b : ph.blobs) {
    double mag = b.amplitude * std::pow(kTwoPi, 1.5) * b.sigma * b.sigma * b.sigma *
                 std::exp(-0.5 * b.sigma * b.sigma * w2);
    sum += mag * std::polar(1.0, -omega.dot(b.center(t)));
  }
  return sum;
}

std::vector<double> phantom_projection_image(const GaussianBlobPhantom& ph,
                                             const Rotation& rot, double t,
                                             int N, double pixel_size) {
  std::vector<double> img(static_cast<std::size_t>(N) * N, 0.0);
  const Mat3 R = rot.matrix();
  for (const auto& b : ph.blobs) {
    const Vec3 c = mat3_apply(R, b.center(t));
    const double amp = b.amplitude * std::sqrt(kTwoPi) * b.sigma;
    const double inv2s2 = 1.0 / (2.0 * b.sigma * b.sigma);
    for (int j = 0; j < N; ++j) {
      const double y = (j - 0.5 * (N - 1)) * pixel_size;
      const double dy2 = (y - c.y) * (y - c.y);
      for (int i = 0; i < N; ++i) {
        const double x = (i - 0.5 * (N - 1)) * pixel_size;
        img[static_cast<std::size_t>(j) * N + i] +=
            amp * std::exp(-((x - c.x) * (x - c.x) + dy2) * inv2s2);
      }
    }
  }
  return img;
}

VolumeShellCoeffs phantom_to_shells(const GaussianBlobPhantom& ph, double t,
                                    const ShellGrid& grid) {
  VolumeShellCoeffs out = VolumeShellCoeffs::zeros(grid);
  out.dc = phantom_ft(ph, t, {0, 0, 0}).real();
  for (int k = 1; k <= grid.K; ++k) {
    const double r = grid.radius(k);
    SphereQuadrature quad = sphere_quadrature(grid.band(k));
    std::vector<cplx> samples(quad.n_nodes());
    for (int a = 0; a < quad.n_theta(); ++a) {
      double st = std::sin(quad.theta[a]), ct = std::cos(quad.theta[a]);
      for (int b = 0; b < quad.n_phi(); ++b) {
        Vec3 w{r * st * std::cos(quad.phi[b]), r * st * std::sin(quad.phi[b]),
               r * ct};
        samples[quad.node_index(a, b)] = phantom_ft(ph, t, w);
      }
    }
    out.shells[k - 1] = project_to_sh(samples, quad, grid.band(k));
  }
  return out;
}

HyperVolumeCoeffs phantom_to_hypervolume(const GaussianBlobPhantom& ph,
                                         const ShellGrid& grid,
                                         const ParamBasisSpec& basis,
                                         int t_nodes) {
  if (basis.kind != ParamBasisKind::legendre)
    throw std::invalid_argument(
        "phantom_to_hypervolume: fit requires the legendre basis");
  if (t_nodes <= 0) t_nodes = basis.Q + 12;

  HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
  Quadrature1D tq = gauss_legendre_01(t_nodes);
  const std::size_t slice = grid.slice_size();
  for (int i = 0; i < tq.n(); ++i) {
    VolumeShellCoeffs inst = phantom_to_shells(ph, tq.x[i], grid);
    std::vector<double> pb = eval_param_basis(basis, tq.x[i]);
    for (int q = 0; q <= basis.Q; ++q) {
      const double w = tq.w[i] * pb[q];
      cplx* dst = hv.data.data() + static_cast<std::size_t>(q) * slice;
      std::size_t off = 0;
      for (int k = 1; k <= grid.K; ++k) {
        const SHCoeffs& sh = inst.shells[k - 1];
        for (std::size_t n = 0; n < sh.size(); ++n) dst[off + n] += w * sh.a[n];
        off += sh.size();
      }
      hv.dc[q] += w * inst.dc;
    }
  }
  return hv;
}

}  // namespace hypermol
