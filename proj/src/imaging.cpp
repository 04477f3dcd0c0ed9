#include "hypermol/imaging.hpp"

namespace hypermol {

ImageCircleCoeffs project_circle_coeffs(const VolumeShellCoeffs& vol,
                                        const Rotation& rot) {
  ImageCircleCoeffs out = ImageCircleCoeffs::zeros(vol.grid);
  out.dc = vol.dc;
  for (int k = 1; k <= vol.grid.K; ++k) {
    const int p = vol.grid.band(k);
    SHCoeffs rotated = rotate_sh(vol.shells[k - 1], rot);
    std::vector<cplx> h = restrict_equator(rotated);  // index m + p
    for (int m = -p; m <= p; ++m) out.at(k, m) = h[m + p];
  }
  return out;
}

ImageCircleCoeffs project_circle_coeffs(const HyperVolumeCoeffs& hv,
                                        const Rotation& rot, double t) {
  return project_circle_coeffs(instance_at(hv, t), rot);
}

ImageStack add_noise(const ImageStack& stack, double snr, std::uint64_t seed) {
  if (!(snr > 0)) throw std::invalid_argument("add_noise: snr must be positive");
  // signal variance across all clean pixels of the stack
  const std::size_t n = stack.pixels.size();
  if (n == 0) return stack;
  double mean = 0.0;
  for (float v : stack.pixels) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float v : stack.pixels) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);

  const double sigma = std::sqrt(var / snr);
  ImageStack out = stack;
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < n; ++i)
    out.pixels[i] = static_cast<float>(stack.pixels[i] + sigma * normal01(gen));
  return out;
}

ImageCircleCoeffs polar_fourier(const float* image, int N, double pixel_size,
                                const ShellGrid& grid) {
  ImageCircleCoeffs out = ImageCircleCoeffs::zeros(grid);
  const double area = pixel_size * pixel_size;

  // DC: plain pixel sum
  double dc = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(N) * N; ++i) dc += image[i];
  out.dc = dc * area;

  std::vector<cplx> ex(N), ey(N), ring;
  for (int k = 1; k <= grid.K; ++k) {
    const int p = grid.band(k);
    const int M = 2 * p + 2;  // angular samples, even and above Nyquist for band p
    const double r = grid.radius(k);
    ring.assign(M, cplx(0, 0));
    for (int b = 0; b < M; ++b) {
      const double phi = kTwoPi * b / M;
      const double wx = r * std::cos(phi), wy = r * std::sin(phi);
      // I^(w) = sum_pixels I(x,y) e^{-i(wx x + wy y)} * area, separable
      const double x0 = -0.5 * (N - 1) * pixel_size;
      ex[0] = std::polar(1.0, -wx * x0);
      ey[0] = std::polar(1.0, -wy * x0);
      const cplx sx = std::polar(1.0, -wx * pixel_size);
      const cplx sy = std::polar(1.0, -wy * pixel_size);
      for (int i = 1; i < N; ++i) ex[i] = ex[i - 1] * sx;
      for (int j = 1; j < N; ++j) ey[j] = ey[j - 1] * sy;
      cplx acc(0, 0);
      for (int j = 0; j < N; ++j) {
        const float* row = image + static_cast<std::size_t>(j) * N;
        cplx rowsum(0, 0);
        for (int i = 0; i < N; ++i) rowsum += static_cast<double>(row[i]) * ex[i];
        acc += rowsum * ey[j];
      }
      ring[b] = acc * area;
    }
    // angular DFT: alpha_{k,m} = (1/M) sum_b ring_b e^{-i m phi_b}
    for (int m = -p; m <= p; ++m) {
      cplx s(0, 0);
      for (int b = 0; b < M; ++b)
        s += ring[b] * std::polar(1.0, -m * (kTwoPi * b / M));
      out.at(k, m) = s / static_cast<double>(M);
    }
  }
  return out;
}

CircleStack polar_fourier_stack(const ImageStack& stack, const ShellGrid& grid,
                                int threads) {
  CircleStack out;
  out.grid = grid;
  out.count = stack.count;
  out.data.assign(static_cast<std::size_t>(stack.count) * grid.circles_size(),
                  cplx(0, 0));
  out.dc.assign(stack.count, 0.0);
  parallel_for(static_cast<std::size_t>(stack.count), threads, [&](std::size_t i) {
    ImageCircleCoeffs c =
        polar_fourier(stack.image(static_cast<int>(i)), stack.N,
                      stack.pixel_size, grid);
    std::copy(c.a.begin(), c.a.end(), out.image(static_cast<int>(i)));
    out.dc[i] = c.dc;
  });
  return out;
}

}  // namespace hypermol
