#include "hypermol/parambasis.hpp"

namespace hypermol {

std::string to_string(ParamBasisKind kind) {
  switch (kind) {
    case ParamBasisKind::legendre: return "legendre";
    case ParamBasisKind::chebyshev: return "chebyshev";
    case ParamBasisKind::haar: return "haar";
  }
  return "?";
}

ParamBasisKind param_basis_kind_from_string(const std::string& s) {
  if (s == "legendre") return ParamBasisKind::legendre;
  if (s == "chebyshev") return ParamBasisKind::chebyshev;
  if (s == "haar") return ParamBasisKind::haar;
  throw std::invalid_argument("unknown parameter basis kind: " + s);
}

namespace {

// Haar mother: 1 on [0,1/2], -1 on (1/2,1], 0 outside.
double haar_mother(double t) {
  if (t < 0.0 || t > 1.0) return 0.0;
  return t <= 0.5 ? 1.0 : -1.0;
}

}  // namespace

std::vector<double> eval_param_basis(const ParamBasisSpec& spec, double t) {
  if (t < 0.0 || t > 1.0)
    throw std::invalid_argument("eval_param_basis: t outside [0,1]");
  const int Q = spec.Q;
  std::vector<double> v(static_cast<std::size_t>(Q) + 1, 0.0);
  v[0] = 1.0;
  if (Q == 0) return v;

  switch (spec.kind) {
    case ParamBasisKind::legendre: {
      const double x = 2.0 * t - 1.0;
      double p0 = 1.0, p1 = x;
      v[1] = std::sqrt(3.0) * x;
      for (int q = 2; q <= Q; ++q) {
        double p2 = ((2.0 * q - 1.0) * x * p1 - (q - 1.0) * p0) / q;
        v[q] = std::sqrt(2.0 * q + 1.0) * p2;
        p0 = p1;
        p1 = p2;
      }
      break;
    }
    case ParamBasisKind::chebyshev: {
      const double x = 2.0 * t - 1.0;
      double t0 = 1.0, t1 = x;
      v[1] = x;
      for (int q = 2; q <= Q; ++q) {
        double t2 = 2.0 * x * t1 - t0;
        v[q] = t2;
        t0 = t1;
        t1 = t2;
      }
      break;
    }
    case ParamBasisKind::haar: {
      // q = 1 + (2^n - 1) + k  for level n >= 0, 0 <= k < 2^n
      int q = 1;
      for (int n = 0; q <= Q; ++n) {
        int width = 1 << n;
        for (int k = 0; k < width && q <= Q; ++k, ++q) {
          v[q] = std::pow(2.0, 0.5 * n) * haar_mother(width * t - k);
        }
      }
      break;
    }
  }
  return v;
}

Quadrature1D gauss_legendre_m11(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
  Quadrature1D q;
  q.x.resize(n);
  q.w.resize(n);
  // Newton on P_n with cosine initial guesses; nodes symmetric about 0.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.x[i] = -x;
    q.w[i] = w;
    q.x[n - 1 - i] = x;
    q.w[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.x[n / 2] = 0.0;
  return q;
}

Quadrature1D gauss_legendre_01(int n) {
  Quadrature1D q = gauss_legendre_m11(n);
  for (int i = 0; i < n; ++i) {
    q.x[i] = 0.5 * (q.x[i] + 1.0);
    q.w[i] *= 0.5;
  }
  return q;
}

}  // namespace hypermol
