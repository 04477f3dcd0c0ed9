#include "hypermol/sphharm.hpp"

#include "hypermol/parambasis.hpp"

namespace hypermol {

double assoc_legendre(int l, int m, double x) {
  if (m < 0 || m > l) throw std::invalid_argument("assoc_legendre: need 0 <= m <= l");
  if (std::fabs(x) > 1.0) throw std::invalid_argument("assoc_legendre: |x| > 1");

  // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}, then upward in l.
  double pmm = 1.0;
  if (m > 0) {
    double s = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= -fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

void normalized_plm_table(int L, double x, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(L + 1) * (L + 2) / 2, 0.0);
  auto idx = [](int l, int m) {
    return static_cast<std::size_t>(l) * (l + 1) / 2 + m;
  };
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  out[0] = 1.0 / std::sqrt(4.0 * kPi);
  // diagonal S_m^m, Condon-Shortley sign carried by the minus
  for (int m = 1; m <= L; ++m)
    out[idx(m, m)] =
        -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * out[idx(m - 1, m - 1)];
  for (int m = 0; m < L; ++m)
    out[idx(m + 1, m)] = x * std::sqrt(2.0 * m + 3.0) * out[idx(m, m)];
  for (int m = 0; m <= L; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      double a = std::sqrt((4.0 * l * l - 1.0) /
                           (static_cast<double>(l) * l - static_cast<double>(m) * m));
      double b = std::sqrt(
          ((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m)) /
          (4.0 * static_cast<double>(l - 1) * (l - 1) - 1.0));
      out[idx(l, m)] = a * (x * out[idx(l - 1, m)] - b * out[idx(l - 2, m)]);
    }
  }
}

cplx sph_harm(int l, int m, double theta, double phi) {
  if (l < 0 || std::abs(m) > l) throw std::invalid_argument("sph_harm: need |m| <= l");
  int am = std::abs(m);
  std::vector<double> tab;
  normalized_plm_table(l, std::cos(theta), tab);
  double S = tab[static_cast<std::size_t>(l) * (l + 1) / 2 + am];
  cplx y = S * std::polar(1.0, am * phi);
  if (m < 0) {
    y = std::conj(y);
    if (am & 1) y = -y;
  }
  return y;
}

namespace {

// Jacobi polynomial P_n^{(a,b)}(x), three-term recurrence.
double jacobi_poly(int n, int a, int b, double x) {
  if (n == 0) return 1.0;
  double p0 = 1.0;
  double p1 = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
  for (int k = 2; k <= n; ++k) {
    double ab = a + b;
    double c1 = 2.0 * k * (k + ab) * (2.0 * k + ab - 2.0);
    double c2 = (2.0 * k + ab - 1.0) *
                (static_cast<double>(a) * a - static_cast<double>(b) * b);
    double c3 = (2.0 * k + ab - 2.0) * (2.0 * k + ab - 1.0) * (2.0 * k + ab);
    double c4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * (2.0 * k + ab);
    double p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace

double wigner_small_d(int l, int m, int mp, double beta) {
  if (l < 0 || std::abs(m) > l || std::abs(mp) > l)
    throw std::invalid_argument("wigner_small_d: bad indices");
  // Jacobi-polynomial form; the recurrence runs upward in the polynomial
  // degree k = l - max(|m|,|mp|)-ish, which is the growth in l.
  int k = std::min(std::min(l + mp, l - mp), std::min(l + m, l - m));
  int a, lam;
  if (k == l + mp) {
    a = m - mp;
    lam = m - mp;
  } else if (k == l - mp) {
    a = mp - m;
    lam = 0;
  } else if (k == l + m) {
    a = mp - m;
    lam = 0;
  } else {
    a = m - mp;
    lam = m - mp;
  }
  int b = 2 * l - 2 * k - a;
  double sh = std::sin(0.5 * beta), ch = std::cos(0.5 * beta);
  double logc = 0.5 * (std::lgamma(2.0 * l - k + 1.0) + std::lgamma(k + 1.0) -
                       std::lgamma(k + a + 1.0) - std::lgamma(k + b + 1.0));
  double sign = (std::abs(lam) & 1) ? -1.0 : 1.0;
  return sign * std::exp(logc) * std::pow(sh, a) * std::pow(ch, b) *
         jacobi_poly(k, a, b, std::cos(beta));
}

WignerBlock wigner_D(int l, const Rotation& rot) {
  if (l < 0) throw std::invalid_argument("wigner_D: l < 0");
  WignerBlock blk;
  blk.l = l;
  blk.d.assign(static_cast<std::size_t>(2 * l + 1) * (2 * l + 1), cplx(0, 0));
  for (int m = -l; m <= l; ++m) {
    cplx ea = std::polar(1.0, -m * rot.alpha);
    for (int mp = -l; mp <= l; ++mp) {
      cplx eg = std::polar(1.0, -mp * rot.gamma);
      blk.at(m, mp) = ea * wigner_small_d(l, m, mp, rot.beta) * eg;
    }
  }
  return blk;
}

SHCoeffs rotate_sh(const SHCoeffs& coeffs, const Rotation& rot) {
  if (rot.alpha == 0.0 && rot.beta == 0.0 && rot.gamma == 0.0) return coeffs;
  SHCoeffs out = SHCoeffs::zeros(coeffs.L_max);
  for (int l = 0; l <= coeffs.L_max; ++l) {
    WignerBlock D = wigner_D(l, rot);
    for (int m = -l; m <= l; ++m) {
      cplx s(0, 0);
      for (int mp = -l; mp <= l; ++mp) s += D.at(m, mp) * coeffs.at(l, mp);
      out.at(l, m) = s;
    }
  }
  return out;
}

std::vector<double> equator_table(int L) {
  std::vector<double> tab;
  normalized_plm_table(L, 0.0, tab);
  std::vector<double> out(static_cast<std::size_t>(L + 1) * (L + 1), 0.0);
  for (int l = 0; l <= L; ++l) {
    for (int m = -l; m <= l; ++m) {
      int am = std::abs(m);
      double v = tab[static_cast<std::size_t>(l) * (l + 1) / 2 + am];
      if (m < 0 && (am & 1)) v = -v;
      out[static_cast<std::size_t>(l) * l + l + m] = v;
    }
  }
  return out;
}

std::vector<cplx> restrict_equator(const SHCoeffs& coeffs) {
  const int L = coeffs.L_max;
  std::vector<double> eq = equator_table(L);
  std::vector<cplx> h(2 * L + 1, cplx(0, 0));
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m)
      h[m + L] += coeffs.at(l, m) * eq[static_cast<std::size_t>(l) * l + l + m];
  return h;
}

SphereQuadrature sphere_quadrature(int L) {
  if (L < 0) throw std::invalid_argument("sphere_quadrature: L < 0");
  SphereQuadrature q;
  q.L = L;
  Quadrature1D gl = gauss_legendre_m11(L + 1);
  q.theta.resize(L + 1);
  q.w_theta.resize(L + 1);
  for (int a = 0; a <= L; ++a) {
    q.theta[a] = std::acos(gl.x[a]);
    q.w_theta[a] = gl.w[a];
  }
  int nphi = 2 * L + 2;
  q.phi.resize(nphi);
  for (int b = 0; b < nphi; ++b) q.phi[b] = kTwoPi * b / nphi;
  return q;
}

SHCoeffs project_to_sh(std::span<const cplx> samples,
                       const SphereQuadrature& quad, int L) {
  if (L > quad.L) throw std::invalid_argument("project_to_sh: L exceeds quadrature band");
  if (samples.size() != quad.n_nodes())
    throw std::invalid_argument("project_to_sh: sample count mismatch");
  const int nt = quad.n_theta(), nphi = quad.n_phi();

  // angular DFT per theta row: g_m(a) = sum_b f(a,b) e^{-i m phi_b} * 2pi/nphi
  std::vector<cplx> g(static_cast<std::size_t>(nt) * (2 * L + 1));
  const double wphi = kTwoPi / nphi;
  for (int a = 0; a < nt; ++a) {
    for (int m = -L; m <= L; ++m) {
      cplx s(0, 0);
      for (int b = 0; b < nphi; ++b)
        s += samples[quad.node_index(a, b)] * std::polar(1.0, -m * quad.phi[b]);
      g[static_cast<std::size_t>(a) * (2 * L + 1) + (m + L)] = s * wphi;
    }
  }

  SHCoeffs out = SHCoeffs::zeros(L);
  std::vector<double> tab;
  for (int a = 0; a < nt; ++a) {
    normalized_plm_table(L, std::cos(quad.theta[a]), tab);
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        int am = std::abs(m);
        double S = tab[static_cast<std::size_t>(l) * (l + 1) / 2 + am];
        if (m < 0 && (am & 1)) S = -S;
        out.at(l, m) += quad.w_theta[a] * S *
                        g[static_cast<std::size_t>(a) * (2 * L + 1) + (m + L)];
      }
    }
  }
  return out;
}

std::vector<cplx> evaluate_sh_on_quadrature(const SHCoeffs& coeffs,
                                            const SphereQuadrature& quad) {
  const int L = coeffs.L_max;
  const int nt = quad.n_theta(), nphi = quad.n_phi();
  std::vector<cplx> out(quad.n_nodes(), cplx(0, 0));
  std::vector<double> tab;
  std::vector<cplx> gm(2 * L + 1);
  for (int a = 0; a < nt; ++a) {
    normalized_plm_table(L, std::cos(quad.theta[a]), tab);
    std::fill(gm.begin(), gm.end(), cplx(0, 0));
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        int am = std::abs(m);
        double S = tab[static_cast<std::size_t>(l) * (l + 1) / 2 + am];
        if (m < 0 && (am & 1)) S = -S;
        gm[m + L] += coeffs.at(l, m) * S;
      }
    }
    for (int b = 0; b < nphi; ++b) {
      cplx s(0, 0);
      for (int m = -L; m <= L; ++m)
        s += gm[m + L] * std::polar(1.0, m * quad.phi[b]);
      out[quad.node_index(a, b)] = s;
    }
  }
  return out;
}

cplx evaluate_sh(const SHCoeffs& coeffs, double theta, double phi) {
  const int L = coeffs.L_max;
  std::vector<double> tab;
  normalized_plm_table(L, std::cos(theta), tab);
  cplx s(0, 0);
  for (int l = 0; l <= L; ++l) {
    for (int m = -l; m <= l; ++m) {
      int am = std::abs(m);
      double S = tab[static_cast<std::size_t>(l) * (l + 1) / 2 + am];
      if (m < 0 && (am & 1)) S = -S;
      s += coeffs.at(l, m) * S * std::polar(1.0, m * phi);
    }
  }
  return s;
}

}  // namespace hypermol
