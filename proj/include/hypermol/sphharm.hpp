#pragma once

#include <span>
#include <vector>

#include "hypermol/rotation.hpp"
#include "hypermol/util.hpp"

namespace hypermol {

// ---------------------------------------------------------------------------
// Spherical-harmonic conventions.
//
//   Y_l^m(theta, phi) = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!)
//                       * P_l^m(cos theta) * exp(i m phi),       m >= 0,
//   Y_l^{-m} = (-1)^m conj(Y_l^m),
//
// with the Condon-Shortley phase (-1)^m inside P_l^m. Coefficients of a
// rotated function transform per block as  v~_l = D^l(R) v_l  with
//   D^l_{m m'}(alpha,beta,gamma) = e^{-i m alpha} d^l_{m m'}(beta) e^{-i m' gamma},
// matching the active ZYZ convention of Rotation.
// ---------------------------------------------------------------------------

/// Associated Legendre P_l^m(x), 0 <= m <= l, |x| <= 1, Condon-Shortley
/// phase included. Standard recurrence in l for fixed m.
double assoc_legendre(int l, int m, double x);

/// Normalized spherical harmonic Y_l^m(theta, phi), |m| <= l.
cplx sph_harm(int l, int m, double theta, double phi);

/// Coefficients v_{l,m} for 0 <= l <= L_max, -l <= m <= l, flat order
/// l ascending, m ascending from -l. Index of (l,m) is l*l + l + m.
struct SHCoeffs {
  int L_max = 0;
  std::vector<cplx> a;

  static SHCoeffs zeros(int L) {
    SHCoeffs c;
    c.L_max = L;
    c.a.assign(static_cast<std::size_t>(L + 1) * (L + 1), cplx(0, 0));
    return c;
  }
  std::size_t size() const { return a.size(); }
  cplx& at(int l, int m) { return a[static_cast<std::size_t>(l) * l + l + m]; }
  const cplx& at(int l, int m) const {
    return a[static_cast<std::size_t>(l) * l + l + m];
  }
};

/// Wigner small-d matrix element d^l_{m m'}(beta).
double wigner_small_d(int l, int m, int mp, double beta);

/// Dense (2l+1)x(2l+1) block D^l, row index m, column index m', both
/// running -l..l.
struct WignerBlock {
  int l = 0;
  std::vector<cplx> d;  // row major, (2l+1)^2

  cplx& at(int m, int mp) {
    return d[static_cast<std::size_t>(m + l) * (2 * l + 1) + (mp + l)];
  }
  const cplx& at(int m, int mp) const {
    return d[static_cast<std::size_t>(m + l) * (2 * l + 1) + (mp + l)];
  }
};

WignerBlock wigner_D(int l, const Rotation& rot);

/// Rotate an expansion: evaluating the result at x equals evaluating the
/// input at R^{-1} x. Block diagonal in l.
SHCoeffs rotate_sh(const SHCoeffs& coeffs, const Rotation& rot);

/// Values Y_l^m(pi/2, 0) (real) for all 0 <= l <= L, |m| <= l, in SHCoeffs
/// flat order. Zero whenever l+m is odd.
std::vector<double> equator_table(int L);

/// Fourier coefficients h_m, |m| <= L_max, of the restriction of the sphere
/// function to the equator theta = pi/2. Returned vector has length
/// 2*L_max+1, index m + L_max.
std::vector<cplx> restrict_equator(const SHCoeffs& coeffs);

// ---------------------------------------------------------------------------
// Sphere quadrature: Gauss-Legendre in cos(theta) (L+1 nodes) crossed with a
// uniform phi grid (2L+2 nodes). Exact for products Y_l^m conj(Y_l'^m') with
// l, l' <= L; node weights sum to 4pi.
// ---------------------------------------------------------------------------
struct SphereQuadrature {
  int L = 0;
  std::vector<double> theta;    // size L+1
  std::vector<double> w_theta;  // Gauss-Legendre weights in cos(theta)
  std::vector<double> phi;      // size 2L+2

  int n_theta() const { return static_cast<int>(theta.size()); }
  int n_phi() const { return static_cast<int>(phi.size()); }
  std::size_t n_nodes() const {
    return static_cast<std::size_t>(n_theta()) * n_phi();
  }
  /// Combined weight of node (a, b).
  double weight(int a) const {
    return w_theta[a] * (kTwoPi / n_phi());
  }
  std::size_t node_index(int a, int b) const {
    return static_cast<std::size_t>(a) * n_phi() + b;
  }
};

SphereQuadrature sphere_quadrature(int L);

/// Analysis: coefficients from samples on the nodes of `quad` (theta-major
/// layout). Exact for functions band-limited to quad.L; L <= quad.L.
SHCoeffs project_to_sh(std::span<const cplx> samples,
                       const SphereQuadrature& quad, int L);

/// Synthesis on the quadrature grid, theta-major layout.
std::vector<cplx> evaluate_sh_on_quadrature(const SHCoeffs& coeffs,
                                            const SphereQuadrature& quad);

cplx evaluate_sh(const SHCoeffs& coeffs, double theta, double phi);

/// S_l^m(x) = sqrt((2l+1)/(4pi)*(l-m)!/(l+m)!) * P_l^m(x) for all l <= L,
/// 0 <= m <= l, packed at index l*(l+1)/2 + m. Stable for large L.
void normalized_plm_table(int L, double x, std::vector<double>& out);

}  // namespace hypermol
