#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace hypermol {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Deterministic random helpers.
//
// Output files carry a byte-identical determinism contract, so the mapping
// from raw mt19937_64 words to floats is spelled out here instead of relying
// on std::uniform_real_distribution / std::normal_distribution, whose exact
// sequences are implementation-defined.
// ---------------------------------------------------------------------------

/// Uniform double in [0, 1) from the top 53 bits of one generator word.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller. Stateless: consumes two words per call.
inline double normal01(std::mt19937_64& gen) {
  double u1 = uniform01(gen);
  double u2 = uniform01(gen);
  // avoid log(0)
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// ---------------------------------------------------------------------------
// Thread helper. Static block partition: item i is processed by exactly one
// worker and each worker runs its range sequentially, so per-item results do
// not depend on the worker count.
// ---------------------------------------------------------------------------

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t w = 0; w < nt; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Radix-2 complex FFT, in place. Length must be a power of two.
// ---------------------------------------------------------------------------

void fft_pow2(std::vector<cplx>& a, bool inverse);

/// Smallest power of two >= n (and >= 4).
inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 4;
  while (p < n) p <<= 1;
  return p;
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma and the chi-square tail, used by the
// degenerate-parameterization detector.
// ---------------------------------------------------------------------------

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with df degrees of
/// freedom: P(X >= stat).
inline double chi2_sf(double stat, int df) {
  if (stat <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * stat);
}

}  // namespace hypermol
