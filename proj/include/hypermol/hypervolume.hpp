#pragma once

#include "hypermol/parambasis.hpp"
#include "hypermol/sphharm.hpp"

namespace hypermol {

/// p(k) = min(k+1, L_max), for k = 1..K.
std::vector<int> default_band_schedule(int K, int L_max);

// ---------------------------------------------------------------------------
// Concentric Fourier shells. Shell k (1-based) sits at radius k*delta_omega
// and carries a spherical-harmonic expansion with band limit p(k). r = 0 is
// not a shell; the DC value rides along as a separate real scalar.
// ---------------------------------------------------------------------------
struct ShellGrid {
  int K = 0;
  double delta_omega = kPi;
  std::vector<int> p;  // p[k-1] for shell k

  int band(int k) const { return p[static_cast<std::size_t>(k) - 1]; }
  double radius(int k) const { return k * delta_omega; }
  int shell_size(int k) const {
    int b = band(k);
    return (b + 1) * (b + 1);
  }

  /// Offset of shell k inside one q-slice of the coefficient tensor.
  std::size_t shell_offset(int k) const {
    std::size_t off = 0;
    for (int j = 1; j < k; ++j) off += shell_size(j);
    return off;
  }
  /// Coefficients per q-slice: sum_k (p(k)+1)^2.
  std::size_t slice_size() const { return shell_offset(K + 1); }

  /// Circle layout: shell k holds 2 p(k)+1 values, m ascending from -p(k).
  int circle_size(int k) const { return 2 * band(k) + 1; }
  std::size_t circle_offset(int k) const {
    std::size_t off = 0;
    for (int j = 1; j < k; ++j) off += circle_size(j);
    return off;
  }
  std::size_t circles_size() const { return circle_offset(K + 1); }

  int max_band() const;
  bool compatible(const ShellGrid& o) const;
  void validate() const;
};

ShellGrid make_shell_grid(int K, double delta_omega, int L_max);

/// One object instance: per-shell SHCoeffs with band limit p(k), plus DC.
struct VolumeShellCoeffs {
  ShellGrid grid;
  double dc = 0.0;
  std::vector<SHCoeffs> shells;  // shells[k-1]

  static VolumeShellCoeffs zeros(const ShellGrid& grid);
};

/// Flat index of v_{q,k,n,m}: (q, k, n, m) lexicographic, m from -n.
std::size_t tensor_flat_index(int q, int k, int n, int m, const ShellGrid& grid,
                              const ParamBasisSpec& basis);

// ---------------------------------------------------------------------------
// The hyper-object coefficient tensor v_{q,k,n,m}, expanding
//   V(k, theta, phi, t) = sum_q sum_n sum_m v_{q,k,n,m} Pbar_q(t) Y_n^m.
// Immutable in normal use; SGD updates it through axpy below.
// ---------------------------------------------------------------------------
struct HyperVolumeCoeffs {
  ShellGrid grid;
  ParamBasisSpec basis;
  std::vector<cplx> data;  // (Q+1) * slice_size()
  std::vector<double> dc;  // dc[q]

  static HyperVolumeCoeffs zeros(const ShellGrid& grid,
                                 const ParamBasisSpec& basis);

  std::size_t flat_index(int q, int k, int n, int m) const {
    return tensor_flat_index(q, k, n, m, grid, basis);
  }
  cplx& at(int q, int k, int n, int m) { return data[flat_index(q, k, n, m)]; }
  const cplx& at(int q, int k, int n, int m) const {
    return data[flat_index(q, k, n, m)];
  }
  /// Start of the (q, shell k) coefficient block.
  std::size_t block_offset(int q, int k) const {
    return static_cast<std::size_t>(q) * grid.slice_size() + grid.shell_offset(k);
  }
};

/// v_{k,n,m}(t) = sum_q v_{q,k,n,m} Pbar_q(t); linear in hv.
VolumeShellCoeffs instance_at(const HyperVolumeCoeffs& hv, double t);

/// hv += s * g (same shape); the single-writer update used by SGD.
void axpy(HyperVolumeCoeffs& hv, double s, const std::vector<cplx>& g);

enum class SynthesisMode { direct, accelerated };

struct SynthesisResult {
  int N = 0;
  std::vector<double> values;  // N^3, x fastest
  double imag_residual = 0.0;  // max |Im| discarded, relative to max |Re|
};

/// Inverse Fourier synthesis onto a centered N^3 grid with spacing 1/N.
/// direct: plain double sum over radial-trapezoid x sphere-quadrature nodes.
/// accelerated: spherical-Bessel factorization of the same integral.
SynthesisResult synthesize_grid(const VolumeShellCoeffs& vol, int N,
                                SynthesisMode mode, int threads = 0);

}  // namespace hypermol
