#include "hypermol/evalreport.hpp"

#include <algorithm>
#include <numeric>

namespace hypermol {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;  // average rank, 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0)
    throw std::invalid_argument("spearman_abs: constant input column");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman_abs(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3)
    throw std::invalid_argument("spearman_abs: need at least 3 pairs");
  std::vector<double> x(pairs.size()), y(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    x[i] = pairs[i].first;
    y[i] = pairs[i].second;
  }
  return std::fabs(pearson(average_ranks(x), average_ranks(y)));
}

ParamMapping build_param_mapping(const std::vector<double>& t_true,
                                 const std::vector<double>& t_est, int bins) {
  if (t_true.size() != t_est.size())
    throw std::invalid_argument("build_param_mapping: size mismatch");
  ParamMapping m;
  m.pairs.reserve(t_true.size());
  m.histogram.assign(bins, 0);
  for (std::size_t i = 0; i < t_true.size(); ++i) {
    m.pairs.emplace_back(t_true[i], t_est[i]);
    int b = std::min(bins - 1, static_cast<int>(std::clamp(t_est[i], 0.0, 1.0) * bins));
    ++m.histogram[b];
  }
  return m;
}

VolumeShellCoeffs reflect_volume(const VolumeShellCoeffs& vol) {
  VolumeShellCoeffs out = vol;
  for (auto& sh : out.shells)
    for (int l = 1; l <= sh.L_max; l += 2)
      for (int m = -l; m <= l; ++m) sh.at(l, m) = -sh.at(l, m);
  return out;
}

HyperVolumeCoeffs rotate_hypervolume(const HyperVolumeCoeffs& hv,
                                     const Rotation& rot) {
  HyperVolumeCoeffs out = hv;
  for (int q = 0; q <= hv.basis.Q; ++q) {
    for (int k = 1; k <= hv.grid.K; ++k) {
      SHCoeffs sh = SHCoeffs::zeros(hv.grid.band(k));
      const cplx* src = hv.data.data() + hv.block_offset(q, k);
      std::copy(src, src + sh.size(), sh.a.begin());
      SHCoeffs rot_sh = rotate_sh(sh, rot);
      std::copy(rot_sh.a.begin(), rot_sh.a.end(),
                out.data.data() + out.block_offset(q, k));
    }
  }
  return out;
}

VolumeShellCoeffs apply_alignment(const VolumeShellCoeffs& vol,
                                  const AlignResult& ar) {
  VolumeShellCoeffs out = vol;
  for (int k = 1; k <= vol.grid.K; ++k)
    out.shells[k - 1] = rotate_sh(vol.shells[k - 1], ar.g);
  if (ar.reflected) out = reflect_volume(out);
  return out;
}

std::vector<double> shell_correlation(const VolumeShellCoeffs& volA,
                                      const VolumeShellCoeffs& volB) {
  if (!volA.grid.compatible(volB.grid))
    throw std::invalid_argument("shell_correlation: grid mismatch");
  std::vector<double> corr(volA.grid.K, 0.0);
  for (int k = 1; k <= volA.grid.K; ++k) {
    const SHCoeffs& a = volA.shells[k - 1];
    const SHCoeffs& b = volB.shells[k - 1];
    cplx dot(0, 0);
    double na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a.a[i] * std::conj(b.a[i]);
      na += std::norm(a.a[i]);
      nb += std::norm(b.a[i]);
    }
    corr[k - 1] = (na > 0 && nb > 0)
                      ? dot.real() / std::sqrt(na * nb)
                      : std::numeric_limits<double>::quiet_NaN();
  }
  return corr;
}

namespace {

double instance_sqdist(const VolumeShellCoeffs& a, const VolumeShellCoeffs& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.shells.size(); ++k)
    for (std::size_t i = 0; i < a.shells[k].size(); ++i)
      s += std::norm(a.shells[k].a[i] - b.shells[k].a[i]);
  return s;
}

// Residual of candidate (G, reflect) against precomputed target instances;
// source instances already carry the t-flip.
double candidate_residual(const std::vector<VolumeShellCoeffs>& src,
                          const std::vector<VolumeShellCoeffs>& dst,
                          const Rotation& g, bool reflected) {
  double r = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    VolumeShellCoeffs moved = src[i];
    for (std::size_t k = 0; k < moved.shells.size(); ++k)
      moved.shells[k] = rotate_sh(moved.shells[k], g);
    if (reflected) moved = reflect_volume(moved);
    r += instance_sqdist(moved, dst[i]);
  }
  return r;
}

Rotation axis_rotation(int axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 m{};
  switch (axis) {
    case 0: m = {1, 0, 0, 0, c, -s, 0, s, c}; break;
    case 1: m = {c, 0, s, 0, 1, 0, -s, 0, c}; break;
    default: m = {c, -s, 0, s, c, 0, 0, 0, 1}; break;
  }
  return Rotation::from_matrix(m);
}

}  // namespace

AlignResult align_global(const HyperVolumeCoeffs& hvA,
                         const HyperVolumeCoeffs& hvB,
                         const std::vector<double>& t_samples, int threads) {
  if (!hvA.grid.compatible(hvB.grid))
    throw std::invalid_argument("align_global: grid mismatch");
  if (t_samples.empty())
    throw std::invalid_argument("align_global: need t samples");

  std::vector<VolumeShellCoeffs> dst, srcA, srcAflip;
  for (double t : t_samples) {
    dst.push_back(instance_at(hvB, t));
    srcA.push_back(instance_at(hvA, t));
    srcAflip.push_back(instance_at(hvA, 1.0 - t));
  }

  // coarse Euler grid, plus the beta boundaries (incl. the identity)
  std::vector<Rotation> grid;
  const int na = 8, nb = 5, ng = 8;
  for (int ia = 0; ia < na; ++ia) {
    for (int ib = 0; ib < nb; ++ib)
      for (int ig = 0; ig < ng; ++ig)
        grid.push_back({kTwoPi * ia / na,
                        std::acos(1.0 - 2.0 * (ib + 0.5) / nb),
                        kTwoPi * ig / ng});
    grid.push_back({kTwoPi * ia / na, 0.0, 0.0});
    grid.push_back({kTwoPi * ia / na, kPi, 0.0});
  }

  AlignResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int refl = 0; refl < 2; ++refl) {
    for (int flip = 0; flip < 2; ++flip) {
      const auto& src = flip ? srcAflip : srcA;
      std::vector<double> res(grid.size());
      parallel_for(grid.size(), threads, [&](std::size_t i) {
        res[i] = candidate_residual(src, dst, grid[i], refl != 0);
      });
      AlignResult cand;
      cand.reflected = refl != 0;
      cand.flipped_t = flip != 0;
      cand.residual = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (res[i] < cand.residual) {
          cand.residual = res[i];
          cand.g = grid[i];
        }
      }
      // per-branch local refinement: left-compose small axis rotations,
      // halving the step, so a coarse grid cannot pick the wrong branch
      double step = 0.5 * kTwoPi / na;
      while (step > 2e-4) {
        bool improved = false;
        for (int axis = 0; axis < 3; ++axis) {
          for (int sgn = -1; sgn <= 1; sgn += 2) {
            Rotation g2 = Rotation::compose(axis_rotation(axis, sgn * step), cand.g);
            double r = candidate_residual(src, dst, g2, cand.reflected);
            if (r < cand.residual) {
              cand.residual = r;
              cand.g = g2;
              improved = true;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
      if (cand.residual < best.residual) best = cand;
    }
  }
  return best;
}

DetectorResult degenerate_param_detector(const std::vector<double>& t_est,
                                         int bins) {
  if (t_est.size() < 100)
    throw std::invalid_argument("degenerate_param_detector: need >= 100 samples");
  DetectorResult r;
  r.bins = bins;
  std::vector<int> h(bins, 0);
  for (double t : t_est) {
    int b = std::min(bins - 1, static_cast<int>(std::clamp(t, 0.0, 1.0) * bins));
    ++h[b];
  }
  const double expected = static_cast<double>(t_est.size()) / bins;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b)
    chi2 += (h[b] - expected) * (h[b] - expected) / expected;
  r.chi2 = chi2;
  r.p_value = chi2_sf(chi2, bins - 1);
  r.flagged = r.p_value < 1e-3;

  // used range: measure of the smallest union of bins holding 95% of the
  // mass (a plain interval cannot flag mass parked at both endpoints)
  std::vector<int> sorted(h);
  std::sort(sorted.begin(), sorted.end(), std::greater<int>());
  const double target = 0.95 * static_cast<double>(t_est.size());
  double acc = 0;
  int taken = 0;
  while (taken < bins && acc < target) acc += sorted[taken++];
  r.used_range = static_cast<double>(taken) / bins;
  return r;
}

}  // namespace hypermol
