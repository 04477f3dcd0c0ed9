#include "hypermol/hypervolume.hpp"

#include <numeric>

namespace hypermol {

std::vector<int> default_band_schedule(int K, int L_max) {
  if (K < 1) throw std::invalid_argument("default_band_schedule: K < 1");
  std::vector<int> p(K);
  for (int k = 1; k <= K; ++k) p[k - 1] = std::min(k + 1, L_max);
  return p;
}

int ShellGrid::max_band() const {
  int b = 0;
  for (int v : p) b = std::max(b, v);
  return b;
}

bool ShellGrid::compatible(const ShellGrid& o) const {
  return K == o.K && delta_omega == o.delta_omega && p == o.p;
}

void ShellGrid::validate() const {
  if (K < 1 || static_cast<int>(p.size()) != K)
    throw std::invalid_argument("ShellGrid: bad shell count");
  if (!(delta_omega > 0))
    throw std::invalid_argument("ShellGrid: delta_omega must be positive");
  for (int k = 2; k <= K; ++k)
    if (band(k) < band(k - 1))
      throw std::invalid_argument("ShellGrid: p(k) must be non-decreasing");
}

ShellGrid make_shell_grid(int K, double delta_omega, int L_max) {
  ShellGrid g;
  g.K = K;
  g.delta_omega = delta_omega;
  g.p = default_band_schedule(K, L_max);
  g.validate();
  return g;
}

VolumeShellCoeffs VolumeShellCoeffs::zeros(const ShellGrid& grid) {
  VolumeShellCoeffs v;
  v.grid = grid;
  v.shells.reserve(grid.K);
  for (int k = 1; k <= grid.K; ++k) v.shells.push_back(SHCoeffs::zeros(grid.band(k)));
  return v;
}

std::size_t tensor_flat_index(int q, int k, int n, int m, const ShellGrid& grid,
                              const ParamBasisSpec& basis) {
  if (q < 0 || q > basis.Q || k < 1 || k > grid.K || n < 0 || n > grid.band(k) ||
      m < -n || m > n)
    throw std::out_of_range("tensor_flat_index: index out of range");
  return static_cast<std::size_t>(q) * grid.slice_size() + grid.shell_offset(k) +
         static_cast<std::size_t>(n) * n + n + m;
}

HyperVolumeCoeffs HyperVolumeCoeffs::zeros(const ShellGrid& grid,
                                           const ParamBasisSpec& basis) {
  HyperVolumeCoeffs hv;
  hv.grid = grid;
  hv.basis = basis;
  hv.data.assign(static_cast<std::size_t>(basis.Q + 1) * grid.slice_size(),
                 cplx(0, 0));
  hv.dc.assign(basis.Q + 1, 0.0);
  return hv;
}

VolumeShellCoeffs instance_at(const HyperVolumeCoeffs& hv, double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("instance_at: t outside [0,1]");
  std::vector<double> pb = eval_param_basis(hv.basis, t);
  VolumeShellCoeffs out = VolumeShellCoeffs::zeros(hv.grid);
  const std::size_t slice = hv.grid.slice_size();
  for (int k = 1; k <= hv.grid.K; ++k) {
    SHCoeffs& sh = out.shells[k - 1];
    const std::size_t off = hv.grid.shell_offset(k);
    const std::size_t ns = sh.size();
    for (int q = 0; q <= hv.basis.Q; ++q) {
      const cplx* src = hv.data.data() + static_cast<std::size_t>(q) * slice + off;
      const double w = pb[q];
      for (std::size_t i = 0; i < ns; ++i) sh.a[i] += w * src[i];
    }
  }
  for (int q = 0; q <= hv.basis.Q; ++q) out.dc += pb[q] * hv.dc[q];
  return out;
}

void axpy(HyperVolumeCoeffs& hv, double s, const std::vector<cplx>& g) {
  if (g.size() != hv.data.size()) throw std::invalid_argument("axpy: size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) hv.data[i] += s * g[i];
}

namespace {

// DC carried as F == dc on the ball r < delta_omega/2:
// (2pi)^-3 * dc * 4pi * (sin(aR) - aR cos(aR)) / a^3,  a = |x|.
double dc_ball_term(double dc, double R, double a) {
  const double scale = dc / (2.0 * kPi * kPi);
  double z = a * R;
  if (z < 1e-4) {
    double R3 = R * R * R;
    return scale * R3 / 3.0 * (1.0 - 0.1 * z * z);
  }
  return scale * (std::sin(z) - z * std::cos(z)) / (a * a * a);
}

// Radial trapezoid weight for shell k on nodes 0, dw, ..., K*dw.
double radial_weight(const ShellGrid& g, int k) {
  return (k == g.K) ? 0.5 * g.delta_omega : g.delta_omega;
}

std::vector<double> grid_coords(int N) {
  std::vector<double> x(N);
  for (int i = 0; i < N; ++i) x[i] = (i - 0.5 * (N - 1)) / N;
  return x;
}

SynthesisResult synthesize_direct(const VolumeShellCoeffs& vol, int N, int threads) {
  const ShellGrid& g = vol.grid;
  const std::vector<double> xs = grid_coords(N);
  const double rmax_x = std::sqrt(3.0) * std::fabs(xs[0]);

  const std::size_t total = static_cast<std::size_t>(N) * N * N;
  std::vector<cplx> acc(total, cplx(0, 0));

  for (int k = 1; k <= g.K; ++k) {
    const double r = g.radius(k);
    // quadrature band wide enough for the plane-wave factor on this shell
    const int Lq = g.band(k) + static_cast<int>(std::ceil(r * rmax_x)) + 24;
    SphereQuadrature quad = sphere_quadrature(Lq);
    std::vector<cplx> F = evaluate_sh_on_quadrature(vol.shells[k - 1], quad);
    const double wr = radial_weight(g, k) * r * r / (8.0 * kPi * kPi * kPi);

    const int nt = quad.n_theta(), nphi = quad.n_phi();
    const double h = 1.0 / N;  // grid spacing
    // per-node separable phase tables, then rank-1 accumulation
    parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t zi) {
      std::vector<cplx> ex(N), ey(N);
      for (int a = 0; a < nt; ++a) {
        const double st = std::sin(quad.theta[a]), ct = std::cos(quad.theta[a]);
        for (int b = 0; b < nphi; ++b) {
          const cplx Fv = F[quad.node_index(a, b)];
          if (std::abs(Fv) == 0.0) continue;
          const double wx = r * st * std::cos(quad.phi[b]);
          const double wy = r * st * std::sin(quad.phi[b]);
          const double wz = r * ct;
          const cplx c = Fv * (wr * quad.weight(a)) *
                         std::polar(1.0, wz * xs[zi]);
          ex[0] = std::polar(1.0, wx * xs[0]);
          ey[0] = std::polar(1.0, wy * xs[0]);
          const cplx sx = std::polar(1.0, wx * h), sy = std::polar(1.0, wy * h);
          for (int i = 1; i < N; ++i) ex[i] = ex[i - 1] * sx;
          for (int j = 1; j < N; ++j) ey[j] = ey[j - 1] * sy;
          cplx* slab = acc.data() + zi * N * N;
          for (int j = 0; j < N; ++j) {
            const cplx cy = c * ey[j];
            cplx* row = slab + static_cast<std::size_t>(j) * N;
            for (int i = 0; i < N; ++i) row[i] += cy * ex[i];
          }
        }
      }
    });
  }

  SynthesisResult out;
  out.N = N;
  out.values.resize(total);
  double max_re = 0.0, max_im = 0.0;
  const double R_dc = 0.5 * g.delta_omega;
  for (int zi = 0; zi < N; ++zi)
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        std::size_t idx = (static_cast<std::size_t>(zi) * N + j) * N + i;
        double a = std::sqrt(xs[i] * xs[i] + xs[j] * xs[j] + xs[zi] * xs[zi]);
        double v = acc[idx].real() + dc_ball_term(vol.dc, R_dc, a);
        out.values[idx] = v;
        max_re = std::max(max_re, std::fabs(v));
        max_im = std::max(max_im, std::fabs(acc[idx].imag()));
      }
  out.imag_residual = max_re > 0 ? max_im / max_re : 0.0;
  return out;
}

SynthesisResult synthesize_accelerated(const VolumeShellCoeffs& vol, int N,
                                       int threads) {
  const ShellGrid& g = vol.grid;
  const std::vector<double> xs = grid_coords(N);
  const std::size_t total = static_cast<std::size_t>(N) * N * N;
  const int Lmax = g.max_band();
  const double R_dc = 0.5 * g.delta_omega;

  SynthesisResult out;
  out.N = N;
  out.values.assign(total, 0.0);
  double max_im_shared = 0.0;
  std::vector<double> max_im_per(N, 0.0);

  parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t zi) {
    std::vector<double> tab;
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < N; ++i) {
        const double x = xs[i], y = xs[j], z = xs[zi];
        const double rr = std::sqrt(x * x + y * y + z * z);
        const double theta = rr > 0 ? std::acos(std::clamp(z / rr, -1.0, 1.0)) : 0.0;
        const double phi = std::atan2(y, x);
        normalized_plm_table(Lmax, std::cos(theta), tab);

        cplx sum(0, 0);
        for (int k = 1; k <= g.K; ++k) {
          const double r = g.radius(k);
          const int p = g.band(k);
          const SHCoeffs& sh = vol.shells[k - 1];
          const double wr =
              radial_weight(g, k) * r * r / (2.0 * kPi * kPi);  // 4pi/(2pi)^3
          // sum_n i^n j_n(r rr) sum_m v_{nm} Y_n^m(xhat)
          cplx shell(0, 0);
          for (int n = 0; n <= p; ++n) {
            double jn = std::sph_bessel(static_cast<unsigned>(n), r * rr);
            if (jn == 0.0) continue;
            cplx ang(0, 0);
            for (int m = -n; m <= n; ++m) {
              int am = std::abs(m);
              double S = tab[static_cast<std::size_t>(n) * (n + 1) / 2 + am];
              if (m < 0 && (am & 1)) S = -S;
              ang += sh.at(n, m) * S * std::polar(1.0, m * phi);
            }
            cplx in = std::polar(1.0, 0.5 * kPi * n);  // i^n
            shell += in * jn * ang;
          }
          sum += wr * shell;
        }
        std::size_t idx = (static_cast<std::size_t>(zi) * N + j) * N + i;
        out.values[idx] = sum.real() + dc_ball_term(vol.dc, R_dc, rr);
        max_im_per[zi] = std::max(max_im_per[zi], std::fabs(sum.imag()));
      }
    }
  });
  for (double v : max_im_per) max_im_shared = std::max(max_im_shared, v);
  double max_re = 0.0;
  for (double v : out.values) max_re = std::max(max_re, std::fabs(v));
  out.imag_residual = max_re > 0 ? max_im_shared / max_re : 0.0;
  return out;
}

}  // namespace

SynthesisResult synthesize_grid(const VolumeShellCoeffs& vol, int N,
                                SynthesisMode mode, int threads) {
  if (N < 1) throw std::invalid_argument("synthesize_grid: N < 1");
  vol.grid.validate();
  return mode == SynthesisMode::direct ? synthesize_direct(vol, N, threads)
                                       : synthesize_accelerated(vol, N, threads);
}

}  // namespace hypermol
