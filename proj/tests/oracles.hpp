// Test-only oracles, independent of the library paths they check.
#pragma once

#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "hypermol/rotation.hpp"
#include "hypermol/util.hpp"

namespace oracles {

using hypermol::cplx;
using hypermol::kPi;
using hypermol::kTwoPi;

// Spherical harmonic from first principles: explicit factorial normalization
// and the closed P_l^m recurrence, kept separate from the library's
// normalized-table implementation.
inline double plm_direct(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double s = std::sqrt((1.0 - x) * (1.0 + x));
    double f = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= -f * s;
      f += 2.0;
    }
  }
  if (l == m) return pmm;
  double p1 = x * (2 * m + 1) * pmm;
  if (l == m + 1) return p1;
  double p2 = 0;
  for (int ll = m + 2; ll <= l; ++ll) {
    p2 = (x * (2 * ll - 1) * p1 - (ll + m - 1) * pmm) / (ll - m);
    pmm = p1;
    p1 = p2;
  }
  return p2;
}

inline cplx sph_harm_direct(int l, int m, double theta, double phi) {
  int am = std::abs(m);
  double logn = 0.5 * (std::log((2.0 * l + 1) / (4.0 * kPi)) +
                       std::lgamma(l - am + 1.0) - std::lgamma(l + am + 1.0));
  cplx y = std::exp(logn) * plm_direct(l, am, std::cos(theta)) *
           std::polar(1.0, am * phi);
  if (m < 0) {
    y = std::conj(y);
    if (am & 1) y = -y;
  }
  return y;
}

// Midpoint-rule integral over the sphere, dense enough to serve as a slow
// reference for band-limited integrands.
inline cplx sphere_integral(const std::function<cplx(double, double)>& f,
                            int n_theta = 200, int n_phi = 400) {
  cplx sum(0, 0);
  for (int a = 0; a < n_theta; ++a) {
    double theta = kPi * (a + 0.5) / n_theta;
    double w = std::sin(theta) * (kPi / n_theta) * (kTwoPi / n_phi);
    for (int b = 0; b < n_phi; ++b) {
      double phi = kTwoPi * b / n_phi;
      sum += w * f(theta, phi);
    }
  }
  return sum;
}

// Brute-force 3-D box quadrature of f(x) e^{-i<w,x>}.
inline cplx fourier_integral_3d(const std::function<double(hypermol::Vec3)>& f,
                                const hypermol::Vec3& omega, double half_box,
                                int n) {
  const double h = 2.0 * half_box / n;
  cplx sum(0, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        hypermol::Vec3 x{-half_box + (i + 0.5) * h, -half_box + (j + 0.5) * h,
                         -half_box + (k + 0.5) * h};
        sum += f(x) * std::polar(1.0, -omega.dot(x));
      }
  return sum * (h * h * h);
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

inline double rel_err(cplx got, cplx want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace oracles
