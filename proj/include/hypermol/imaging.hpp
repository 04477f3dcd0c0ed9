#pragma once

#include "hypermol/hypervolume.hpp"

namespace hypermol {

/// Ground-truth (rotation, t) pair carried only in simulation metadata.
struct TruthLabel {
  Rotation rot;
  double t = 0.0;
};

/// Real pixel images, row major, image major. Pixels are f32 to match the
/// on-disk format; arithmetic happens in double.
struct ImageStack {
  int count = 0;
  int N = 0;
  double pixel_size = 0.0;
  std::vector<float> pixels;
  std::vector<TruthLabel> labels;  // empty unless simulated

  float* image(int i) {
    return pixels.data() + static_cast<std::size_t>(i) * N * N;
  }
  const float* image(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * N * N;
  }
};

/// Fourier coefficients alpha_{k,m} of one image on concentric circles
/// (|m| <= p(k)), plus the DC value. Layout per ShellGrid::circle_offset.
struct ImageCircleCoeffs {
  ShellGrid grid;
  std::vector<cplx> a;
  double dc = 0.0;

  cplx& at(int k, int m) {
    return a[grid.circle_offset(k) + (m + grid.band(k))];
  }
  const cplx& at(int k, int m) const {
    return a[grid.circle_offset(k) + (m + grid.band(k))];
  }
  static ImageCircleCoeffs zeros(const ShellGrid& grid) {
    ImageCircleCoeffs c;
    c.grid = grid;
    c.a.assign(grid.circles_size(), cplx(0, 0));
    return c;
  }
};

/// Circle-coefficient stack sharing one grid (maps 1:1 onto HVCIR1).
struct CircleStack {
  ShellGrid grid;
  int count = 0;
  std::vector<cplx> data;  // count * circles_size()
  std::vector<double> dc;  // per image

  const cplx* image(int i) const {
    return data.data() + static_cast<std::size_t>(i) * grid.circles_size();
  }
  cplx* image(int i) {
    return data.data() + static_cast<std::size_t>(i) * grid.circles_size();
  }
  ImageCircleCoeffs get(int i) const {
    ImageCircleCoeffs c;
    c.grid = grid;
    c.a.assign(image(i), image(i) + grid.circles_size());
    c.dc = dc[i];
    return c;
  }
  void push_back(const ImageCircleCoeffs& c) {
    data.insert(data.end(), c.a.begin(), c.a.end());
    dc.push_back(c.dc);
    ++count;
  }
};

/// Central-slice forward model: per shell, rotate the instance's expansion
/// and restrict it to the equator, truncated to |m| <= p(k).
ImageCircleCoeffs project_circle_coeffs(const HyperVolumeCoeffs& hv,
                                        const Rotation& rot, double t);

/// Same, for a single already-extracted instance.
ImageCircleCoeffs project_circle_coeffs(const VolumeShellCoeffs& vol,
                                        const Rotation& rot);

/// Per-pixel iid Gaussian noise with variance (pixel variance of the clean
/// stack) / snr. Deterministic given the seed.
ImageStack add_noise(const ImageStack& stack, double snr, std::uint64_t seed);

/// Discrete Fourier sums of one image at polar nodes (r_k, phi_b), phi_b
/// uniform with 2 p(k)+2 samples, followed by an angular FFT.
ImageCircleCoeffs polar_fourier(const float* image, int N, double pixel_size,
                                const ShellGrid& grid);

CircleStack polar_fourier_stack(const ImageStack& stack, const ShellGrid& grid,
                                int threads = 0);

}  // namespace hypermol
