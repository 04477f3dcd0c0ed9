#include "hypermol/reconstruct.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>

namespace hypermol {

namespace {

// Rotate-restrict operator for one fixed rotation: Wigner blocks up to L
// plus the equator table. Forward maps shell coefficients to circle
// coefficients; adjoint maps a circle residual back.
struct RotRestrict {
  int L = 0;
  std::vector<WignerBlock> D;
  std::vector<double> eq;

  static RotRestrict build(int L, const Rotation& rot) {
    RotRestrict rr;
    rr.L = L;
    rr.D.reserve(L + 1);
    for (int l = 0; l <= L; ++l) rr.D.push_back(wigner_D(l, rot));
    rr.eq = equator_table(L);
    return rr;
  }

  // h[m+p] += sum_n Yeq(n,m) [D^n v_n]_m
  void forward_shell(const cplx* v, int p, cplx* h) const {
    for (int n = 0; n <= p; ++n) {
      const WignerBlock& Dn = D[n];
      const cplx* vn = v + n * n;
      for (int m = -n; m <= n; ++m) {
        const double y = eq[static_cast<std::size_t>(n) * n + n + m];
        if (y == 0.0) continue;
        cplx s(0, 0);
        for (int mp = -n; mp <= n; ++mp) s += Dn.at(m, mp) * vn[mp + n];
        h[m + p] += y * s;
      }
    }
  }

  // g[(n,mp)] += scale * sum_m Yeq(n,m) conj(D^n_{m,mp}) e[m+p]
  void adjoint_shell(const cplx* e, int p, double scale, cplx* g) const {
    for (int n = 0; n <= p; ++n) {
      const WignerBlock& Dn = D[n];
      cplx* gn = g + n * n;
      for (int m = -n; m <= n; ++m) {
        const double y = eq[static_cast<std::size_t>(n) * n + n + m];
        if (y == 0.0) continue;
        const cplx c = (scale * y) * e[m + p];
        for (int mp = -n; mp <= n; ++mp) gn[mp + n] += std::conj(Dn.at(m, mp)) * c;
      }
    }
  }
};

std::vector<double> shell_weights(const ShellGrid& grid) {
  std::vector<double> w(grid.K + 1, 0.0);
  for (int k = 1; k <= grid.K; ++k) w[k] = grid.radius(k);
  return w;
}

}  // namespace

void MarchingSchedule::validate(int K_max, int Q_max) const {
  if (stages.empty()) throw std::invalid_argument("schedule: no stages");
  if (stages.front().Q != 0)
    throw std::invalid_argument("schedule: first stage must have Q = 0");
  int pk = 0, pq = 0;
  for (const auto& s : stages) {
    if (s.K < pk || s.Q < pq)
      throw std::invalid_argument("schedule: K and Q must be non-decreasing");
    if (s.K < 1 || s.K > K_max || s.Q < 0 || s.Q > Q_max)
      throw std::invalid_argument("schedule: stage exceeds grid/basis bounds");
    if (s.iters < 0 || !(s.step > 0))
      throw std::invalid_argument("schedule: bad iters/step");
    pk = s.K;
    pq = s.Q;
  }
}

MarchingSchedule default_schedule(int K_max, int Q_max, int iters_per_stage,
                                  double base_step) {
  MarchingSchedule sch;
  int K = std::min(4, K_max), Q = 0;
  double step = base_step;
  bool bump_q = false;
  int stage = 0;
  while (true) {
    sch.stages.push_back({K, Q, iters_per_stage, step});
    if (K == K_max && Q == Q_max) break;
    if (bump_q && Q < Q_max)
      ++Q;
    else if (K < K_max)
      K = std::min(K + 2, K_max);
    else
      ++Q;
    bump_q = !bump_q;
    step *= 0.5;
    if (++stage > 64) break;  // guard against degenerate bounds
  }
  return sch;
}

Rotation compose_inplane(const Rotation& rot, double gamma) {
  double a = std::fmod(rot.alpha + gamma, kTwoPi);
  if (a < 0) a += kTwoPi;
  return {a, rot.beta, rot.gamma};
}

namespace {

// Weighted template Gram over active shells: Gram[q][q'] =
// sum_k w_k sum_m circ_q conj(circ_q'), so the squared template norm at t is
// sum_{qq'} Pbar_q Pbar_q' Gram[q][q'].
std::vector<cplx> template_gram(const TemplateEntry& e, const ShellGrid& grid,
                                int K_active, int Q_active,
                                const std::vector<double>& w) {
  const std::size_t csz = grid.circles_size();
  std::vector<cplx> gram(static_cast<std::size_t>(Q_active + 1) * (Q_active + 1),
                         cplx(0, 0));
  for (int q = 0; q <= Q_active; ++q) {
    for (int qp = 0; qp <= q; ++qp) {
      cplx s(0, 0);
      const cplx* cq = e.circ_q.data() + static_cast<std::size_t>(q) * csz;
      const cplx* cp = e.circ_q.data() + static_cast<std::size_t>(qp) * csz;
      for (int k = 1; k <= K_active; ++k) {
        const std::size_t off = grid.circle_offset(k);
        cplx sk(0, 0);
        for (int j = 0; j < grid.circle_size(k); ++j)
          sk += cq[off + j] * std::conj(cp[off + j]);
        s += w[k] * sk;
      }
      gram[static_cast<std::size_t>(q) * (Q_active + 1) + qp] = s;
      gram[static_cast<std::size_t>(qp) * (Q_active + 1) + q] = std::conj(s);
    }
  }
  return gram;
}

}  // namespace

TemplateSet make_templates(const HyperVolumeCoeffs& hv,
                           const std::vector<Rotation>& views, int K_active,
                           int Q_active, const std::vector<double>& t_samples,
                           int threads) {
  if (K_active < 1 || K_active > hv.grid.K)
    throw std::invalid_argument("make_templates: bad K_active");
  if (Q_active < 0 || Q_active > hv.basis.Q)
    throw std::invalid_argument("make_templates: bad Q_active");
  TemplateSet T;
  T.grid = hv.grid;
  T.K_active = K_active;
  T.Q_active = Q_active;
  T.t_samples = t_samples;
  T.entries.resize(views.size());
  const int L = hv.grid.band(K_active);
  const std::size_t csz = hv.grid.circles_size();
  const std::vector<double> w = shell_weights(hv.grid);

  parallel_for(views.size(), threads, [&](std::size_t vi) {
    TemplateEntry& e = T.entries[vi];
    e.view = views[vi];
    e.circ_q.assign(static_cast<std::size_t>(Q_active + 1) * csz, cplx(0, 0));
    RotRestrict rr = RotRestrict::build(L, views[vi]);
    for (int q = 0; q <= Q_active; ++q) {
      cplx* circ = e.circ_q.data() + static_cast<std::size_t>(q) * csz;
      for (int k = 1; k <= K_active; ++k) {
        rr.forward_shell(hv.data.data() + hv.block_offset(q, k), hv.grid.band(k),
                         circ + hv.grid.circle_offset(k));
      }
    }
    e.gram = template_gram(e, hv.grid, K_active, Q_active, w);
  });
  return T;
}

Assignment match_image_raw(const cplx* img, const ShellGrid& grid,
                           const TemplateSet& T, const MatchOptions& opts) {
  if (!grid.compatible(T.grid))
    throw std::invalid_argument("match_image: grid mismatch");
  if (T.entries.empty() || T.t_samples.empty())
    throw std::invalid_argument("match_image: empty template set");
  const int Ka = T.K_active;
  const int P = grid.band(Ka);
  const int Qa = T.Q_active;
  const int G = static_cast<int>(next_pow2(
      std::max<std::size_t>(opts.gamma_grid, 2 * static_cast<std::size_t>(P) + 2)));
  const std::vector<double> w = shell_weights(grid);
  const std::size_t csz = grid.circles_size();
  const int nt = static_cast<int>(T.t_samples.size());

  double I2 = 0.0;
  for (int k = 1; k <= Ka; ++k) {
    const std::size_t off = grid.circle_offset(k);
    double sk = 0.0;
    for (int j = 0; j < grid.circle_size(k); ++j) sk += std::norm(img[off + j]);
    I2 += w[k] * sk;
  }

  ParamBasisSpec basis{ParamBasisKind::legendre, Qa};
  std::vector<std::vector<double>> pb(nt);
  for (int j = 0; j < nt; ++j) pb[j] = eval_param_basis(basis, T.t_samples[j]);

  auto t2_of = [&](const TemplateEntry& e, const std::vector<double>& pbt) {
    double T2 = 0.0;
    for (int q = 0; q <= Qa; ++q)
      for (int qp = 0; qp <= Qa; ++qp)
        T2 += pbt[q] * pbt[qp] *
              e.gram[static_cast<std::size_t>(q) * (Qa + 1) + qp].real();
    return T2;
  };

  // degenerate input: all active circle values exactly zero
  if (I2 == 0.0) {
    const TemplateEntry& e0 = T.entries.front();
    Assignment a;
    a.rot = compose_inplane(e0.view, 0.0);
    a.t = T.t_samples[0];
    a.score = t2_of(e0, pb[0]);
    return a;
  }

  Assignment best;
  best.score = std::numeric_limits<double>::infinity();
  int best_view = -1, best_tj = -1;

  // cross(gamma; t) = sum_q Pbar_q(t) Re C_q(gamma): one FFT per q, every t
  // sample then reuses the same gamma spectra
  std::vector<cplx> work;
  std::vector<double> crossq(static_cast<std::size_t>(Qa + 1) * G);
  std::vector<double> view_scores(nt);

  auto eval_t = [&](const std::vector<double>& pbt, double T2, double& score,
                    int& gbest) {
    double cbest = -std::numeric_limits<double>::infinity();
    gbest = 0;
    for (int g = 0; g < G; ++g) {
      double c = 0.0;
      for (int q = 0; q <= Qa; ++q)
        c += pbt[q] * crossq[static_cast<std::size_t>(q) * G + g];
      if (c > cbest) {
        cbest = c;
        gbest = g;
      }
    }
    score = std::max(0.0, T2 + I2 - 2.0 * cbest);
  };

  for (std::size_t vi = 0; vi < T.entries.size(); ++vi) {
    const TemplateEntry& e = T.entries[vi];
    for (int q = 0; q <= Qa; ++q) {
      // Z_q[m] = sum_k w_k circ_q[k,m] conj(img[k,m]), folded mod G
      work.assign(G, cplx(0, 0));
      const cplx* cq = e.circ_q.data() + static_cast<std::size_t>(q) * csz;
      for (int k = 1; k <= Ka; ++k) {
        const int p = grid.band(k);
        const std::size_t off = grid.circle_offset(k);
        for (int m = -p; m <= p; ++m)
          work[((m % G) + G) % G] +=
              w[k] * cq[off + (m + p)] * std::conj(img[off + (m + p)]);
      }
      fft_pow2(work, false);
      double* dst = crossq.data() + static_cast<std::size_t>(q) * G;
      for (int g = 0; g < G; ++g) dst[g] = work[g].real();
    }

    for (int j = 0; j < nt; ++j) {
      double score;
      int g;
      eval_t(pb[j], t2_of(e, pb[j]), score, g);
      view_scores[j] = score;
      if (score < best.score) {
        best.score = score;
        best.t = T.t_samples[j];
        best.rot = compose_inplane(e.view, kTwoPi * g / G);
        best_view = static_cast<int>(vi);
        best_tj = j;
      }
    }

    // 3-point parabola refinement of t around the grid argmin (uniform grid
    // spacing assumed; skipped at the boundary)
    if (opts.refine_t && best_view == static_cast<int>(vi) && nt >= 3 &&
        best_tj > 0 && best_tj < nt - 1) {
      const double s0 = view_scores[best_tj - 1], s1 = view_scores[best_tj],
                   s2 = view_scores[best_tj + 1];
      const double denom = s0 - 2.0 * s1 + s2;
      if (denom > 1e-300) {
        const double dt = T.t_samples[1] - T.t_samples[0];
        double tt = T.t_samples[best_tj] + 0.5 * (s0 - s2) / denom * dt;
        tt = std::clamp(tt, std::max(0.0, T.t_samples[best_tj - 1]),
                        std::min(1.0, T.t_samples[best_tj + 1]));
        std::vector<double> pbt = eval_param_basis(basis, tt);
        double score;
        int g;
        eval_t(pbt, t2_of(e, pbt), score, g);
        if (score < best.score) {
          best.score = score;
          best.t = tt;
          best.rot = compose_inplane(e.view, kTwoPi * g / G);
        }
      }
    }
  }
  return best;
}

Assignment match_image(const ImageCircleCoeffs& img, const TemplateSet& T,
                       const MatchOptions& opts) {
  return match_image_raw(img.a.data(), img.grid, T, opts);
}

ObjectiveGradient objective_and_gradient(const HyperVolumeCoeffs& hv,
                                         const ImageCircleCoeffs& img,
                                         const Rotation& rot, double t,
                                         int K_active, int Q_active) {
  if (!hv.grid.compatible(img.grid))
    throw std::invalid_argument("objective_and_gradient: grid mismatch");
  if (K_active < 1 || K_active > hv.grid.K || Q_active < 0 ||
      Q_active > hv.basis.Q)
    throw std::invalid_argument("objective_and_gradient: bad active bounds");
  const ShellGrid& grid = hv.grid;
  const std::vector<double> w = shell_weights(grid);
  std::vector<double> pbt = eval_param_basis(hv.basis, t);

  RotRestrict rr = RotRestrict::build(grid.band(K_active), rot);
  ObjectiveGradient out;
  out.grad.assign(hv.data.size(), cplx(0, 0));

  std::vector<cplx> inst, h, e, gshell;
  for (int k = 1; k <= K_active; ++k) {
    const int p = grid.band(k);
    const int sz = grid.shell_size(k);
    inst.assign(sz, cplx(0, 0));
    for (int q = 0; q <= Q_active; ++q) {
      const cplx* src = hv.data.data() + hv.block_offset(q, k);
      for (int i = 0; i < sz; ++i) inst[i] += pbt[q] * src[i];
    }
    h.assign(2 * p + 1, cplx(0, 0));
    rr.forward_shell(inst.data(), p, h.data());
    e.assign(2 * p + 1, cplx(0, 0));
    const std::size_t off = grid.circle_offset(k);
    double sk = 0.0;
    for (int m = -p; m <= p; ++m) {
      e[m + p] = h[m + p] - img.a[off + (m + p)];
      sk += std::norm(e[m + p]);
    }
    out.cost += w[k] * sk;

    gshell.assign(sz, cplx(0, 0));
    rr.adjoint_shell(e.data(), p, 2.0 * w[k], gshell.data());
    for (int q = 0; q <= Q_active; ++q) {
      cplx* dst = out.grad.data() + hv.block_offset(q, k);
      for (int i = 0; i < sz; ++i) dst[i] += pbt[q] * gshell[i];
    }
  }
  return out;
}

void sgd_step(HyperVolumeCoeffs& hv, const CircleStack& stack,
              const std::vector<Assignment>& minibatch, double step,
              int K_active, int Q_active, int threads) {
  if (!(step > 0)) throw std::invalid_argument("sgd_step: step must be positive");
  if (minibatch.empty()) return;

  std::vector<std::vector<cplx>> grads(minibatch.size());
  parallel_for(minibatch.size(), threads, [&](std::size_t i) {
    const Assignment& a = minibatch[i];
    ImageCircleCoeffs img = stack.get(a.image_index);
    grads[i] = objective_and_gradient(hv, img, a.rot, a.t, K_active, Q_active)
                   .grad;
  });

  // fixed reduction order: ascending image index, stable on duplicates
  std::vector<std::size_t> order(minibatch.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return minibatch[a].image_index < minibatch[b].image_index;
  });
  std::vector<cplx> mean(hv.data.size(), cplx(0, 0));
  for (std::size_t i : order)
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += grads[i][j];
  const double s = -step / static_cast<double>(minibatch.size());
  axpy(hv, s, mean);
}

HyperVolumeCoeffs init_spherical_average(const CircleStack& stack,
                                         const ParamBasisSpec& basis) {
  if (stack.count < 1)
    throw std::invalid_argument("init_spherical_average: empty stack");
  HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(stack.grid, basis);
  const double inv = 1.0 / stack.count;
  const double norm = std::sqrt(4.0 * kPi);  // 1 / Y_0^0(pi/2, 0)
  for (int k = 1; k <= stack.grid.K; ++k) {
    const int p = stack.grid.band(k);
    cplx mean(0, 0);
    for (int i = 0; i < stack.count; ++i)
      mean += stack.image(i)[stack.grid.circle_offset(k) + p];  // m = 0
    hv.at(0, k, 0, 0) = norm * mean * inv;
  }
  double dcm = 0.0;
  for (int i = 0; i < stack.count; ++i) dcm += stack.dc[i];
  hv.dc[0] = dcm * inv;
  return hv;
}

double objective_stack(const HyperVolumeCoeffs& hv, const CircleStack& stack,
                       const std::vector<Assignment>& assignments, int K_active,
                       int Q_active) {
  double total = 0.0;
  for (const auto& a : assignments) {
    ImageCircleCoeffs img = stack.get(a.image_index);
    total +=
        objective_and_gradient(hv, img, a.rot, a.t, K_active, Q_active).cost;
  }
  return total;
}

namespace {

std::vector<double> stratified_t_grid(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = (i + 0.5) / n;
  return t;
}

// Monotone piecewise-linear CDF of the assigned t values, floored so it is
// strictly increasing, used to rank-uniformize the parameterization.
struct EmpiricalCdf {
  std::vector<double> cum;  // cum[j] = F(j/B), cum[0] = 0, cum[B] = 1
  int B = 64;

  static EmpiricalCdf build(const std::vector<double>& ts, int bins = 64) {
    EmpiricalCdf f;
    f.B = bins;
    std::vector<double> h(bins, 1.0);  // Laplace floor keeps F strictly monotone
    for (double t : ts) {
      int b = std::min(bins - 1, static_cast<int>(t * bins));
      h[b] += 1.0;
    }
    f.cum.assign(bins + 1, 0.0);
    for (int b = 0; b < bins; ++b) f.cum[b + 1] = f.cum[b] + h[b];
    for (auto& c : f.cum) c /= f.cum[bins];
    return f;
  }
  double value(double t) const {
    t = std::clamp(t, 0.0, 1.0);
    double x = t * B;
    int b = std::min(B - 1, static_cast<int>(x));
    return cum[b] + (cum[b + 1] - cum[b]) * (x - b);
  }
  double inverse(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    int lo = 0, hi = B;
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      if (cum[mid] <= u)
        lo = mid;
      else
        hi = mid;
    }
    double span = cum[lo + 1] - cum[lo];
    double frac = span > 0 ? (u - cum[lo]) / span : 0.0;
    return (lo + frac) / B;
  }
};

// hv'(u) = hv(F^{-1}(u)): Gauss-Legendre projection of the warped instance
// path back onto the parameter basis.
HyperVolumeCoeffs reparameterize(const HyperVolumeCoeffs& hv,
                                 const EmpiricalCdf& F) {
  HyperVolumeCoeffs out = HyperVolumeCoeffs::zeros(hv.grid, hv.basis);
  Quadrature1D uq = gauss_legendre_01(hv.basis.Q + 12);
  const std::size_t slice = hv.grid.slice_size();
  for (int i = 0; i < uq.n(); ++i) {
    const double u = uq.x[i];
    VolumeShellCoeffs inst = instance_at(hv, F.inverse(u));
    std::vector<double> pbu = eval_param_basis(hv.basis, u);
    for (int q = 0; q <= hv.basis.Q; ++q) {
      const double wq = uq.w[i] * pbu[q];
      cplx* dst = out.data.data() + static_cast<std::size_t>(q) * slice;
      std::size_t off = 0;
      for (int k = 1; k <= hv.grid.K; ++k) {
        const SHCoeffs& sh = inst.shells[k - 1];
        for (std::size_t j = 0; j < sh.size(); ++j) dst[off + j] += wq * sh.a[j];
        off += sh.size();
      }
      out.dc[q] += wq * inst.dc;
    }
  }
  return out;
}

std::vector<int> t_histogram(const std::vector<Assignment>& latest, int bins) {
  std::vector<int> h(bins, 0);
  for (const auto& a : latest) {
    if (a.image_index < 0) continue;
    int b = std::min(bins - 1, static_cast<int>(a.t * bins));
    ++h[b];
  }
  return h;
}

}  // namespace

ReconstructResult reconstruct(const CircleStack& circles,
                              const ReconstructOptions& opts) {
  circles.grid.validate();
  opts.schedule.validate(circles.grid.K, opts.basis.Q);
  if (circles.count < 1)
    throw std::invalid_argument("reconstruct: empty circle stack");
  if (opts.minibatch < 1 || opts.sphere_samples < 1 || opts.t_samples < 1)
    throw std::invalid_argument("reconstruct: bad sampling counts");

  std::mt19937_64 gen(opts.seed);
  ReconstructResult res;
  res.hv = init_spherical_average(circles, opts.basis);

  // last assignment seen per image, for diagnostics and reparameterization
  std::vector<Assignment> latest(circles.count);
  const std::vector<double> t_grid = stratified_t_grid(opts.t_samples);

  int stage_idx = 0;
  int q_enabled = 0;
  for (const MarchingStage& st : opts.schedule.stages) {
    // seed freshly activated q-slices so t values do not tie exactly
    if (st.Q > q_enabled && opts.q_seed_scale > 0) {
      for (int q = q_enabled + 1; q <= st.Q; ++q) {
        for (int k = 1; k <= st.K; ++k) {
          const int sz = circles.grid.shell_size(k);
          const cplx* base = res.hv.data.data() + res.hv.block_offset(0, k);
          double rms = 0;
          for (int i = 0; i < sz; ++i) rms += std::norm(base[i]);
          rms = std::sqrt(rms / sz);
          cplx* dst = res.hv.data.data() + res.hv.block_offset(q, k);
          for (int i = 0; i < sz; ++i)
            dst[i] += opts.q_seed_scale * rms *
                      cplx(normal01(gen), normal01(gen));
        }
      }
    }
    q_enabled = std::max(q_enabled, st.Q);

    double score_sum = 0.0;
    std::size_t score_n = 0;
    int zero_circles = 0;

    for (int it = 0; it < st.iters; ++it) {
      // minibatch indices (with replacement), then fresh template samples
      std::vector<int> batch(opts.minibatch);
      for (int& b : batch)
        b = std::min(circles.count - 1,
                     static_cast<int>(uniform01(gen) * circles.count));
      std::vector<Rotation> views(opts.sphere_samples);
      for (auto& v : views) {
        Rotation r = random_rotation(gen);
        v = Rotation{0.0, r.beta, r.gamma};
      }
      std::vector<double> ts = t_grid;
      if (!opts.stratified_t)
        for (auto& t : ts) t = uniform01(gen);
      if (st.Q == 0) ts = {0.5};  // homogeneous stage: t is irrelevant

      TemplateSet T = make_templates(res.hv, views, st.K, st.Q, ts, opts.threads);
      MatchOptions mopts = opts.match;
      if (!opts.stratified_t) mopts.refine_t = false;

      std::vector<Assignment> batch_assign(batch.size());
      parallel_for(batch.size(), opts.threads, [&](std::size_t i) {
        Assignment a = match_image_raw(circles.image(batch[i]), circles.grid, T,
                                       mopts);
        a.image_index = batch[i];
        batch_assign[i] = a;
      });
      for (const auto& a : batch_assign) {
        latest[a.image_index] = a;
        score_sum += a.score;
        ++score_n;
        bool zero = true;
        const cplx* im = circles.image(a.image_index);
        for (std::size_t j = 0; j < circles.grid.circles_size() && zero; ++j)
          zero = (im[j] == cplx(0, 0));
        if (zero) ++zero_circles;
      }
      sgd_step(res.hv, circles, batch_assign, st.step, st.K, st.Q, opts.threads);
    }

    StageDiag d;
    d.stage = stage_idx++;
    d.K = st.K;
    d.Q = st.Q;
    d.iters = st.iters;
    d.step = st.step;
    d.mean_score = score_n ? score_sum / static_cast<double>(score_n) : 0.0;
    d.t_hist = t_histogram(latest, 20);
    d.images_seen = 0;
    for (const auto& a : latest)
      if (a.image_index >= 0) ++d.images_seen;
    d.zero_circle_images = zero_circles;
    res.diagnostics.push_back(d);

    if (opts.reparam_uniform && st.Q > 0 &&
        opts.basis.kind == ParamBasisKind::legendre && d.images_seen >= 100) {
      std::vector<double> seen;
      seen.reserve(d.images_seen);
      for (const auto& a : latest)
        if (a.image_index >= 0) seen.push_back(a.t);
      EmpiricalCdf F = EmpiricalCdf::build(seen);
      res.hv = reparameterize(res.hv, F);
      for (auto& a : latest)
        if (a.image_index >= 0) a.t = F.value(a.t);
    }
  }

  // final full-pass assignment with a dense fresh template set
  const MarchingStage& fin = opts.schedule.stages.back();
  std::vector<Rotation> views(opts.final_sphere_samples);
  for (auto& v : views) {
    Rotation r = random_rotation(gen);
    v = Rotation{0.0, r.beta, r.gamma};
  }
  std::vector<double> ts = fin.Q == 0 ? std::vector<double>{0.5} : t_grid;
  TemplateSet T = make_templates(res.hv, views, fin.K, fin.Q, ts, opts.threads);
  res.assignments.resize(circles.count);
  double fsum = 0.0;
  parallel_for(static_cast<std::size_t>(circles.count), opts.threads,
               [&](std::size_t i) {
                 Assignment a = match_image_raw(circles.image(static_cast<int>(i)),
                                                circles.grid, T, opts.match);
                 a.image_index = static_cast<int>(i);
                 res.assignments[i] = a;
               });
  for (const auto& a : res.assignments) fsum += a.score;

  StageDiag fd;
  fd.stage = stage_idx;
  fd.K = fin.K;
  fd.Q = fin.Q;
  fd.iters = 0;
  fd.step = 0.0;
  fd.mean_score = circles.count ? fsum / circles.count : 0.0;
  fd.t_hist = t_histogram(res.assignments, 20);
  fd.images_seen = circles.count;
  res.diagnostics.push_back(fd);
  return res;
}

HyperVolumeCoeffs solve_known_assignments(const CircleStack& circles,
                                          const std::vector<TruthLabel>& labels,
                                          const ShellGrid& grid,
                                          const ParamBasisSpec& basis,
                                          double ridge, int threads) {
  if (static_cast<int>(labels.size()) != circles.count)
    throw std::invalid_argument("solve_known_assignments: label count mismatch");
  if (!circles.grid.compatible(grid))
    throw std::invalid_argument("solve_known_assignments: grid mismatch");
  if (ridge < 0) throw std::invalid_argument("solve_known_assignments: ridge < 0");
  const int Q = basis.Q;
  const int n_img = circles.count;
  const int L = grid.band(grid.K);

  // per-image basis values
  std::vector<std::vector<double>> pb(n_img);
  for (int i = 0; i < n_img; ++i) pb[i] = eval_param_basis(basis, labels[i].t);

  threads = resolve_threads(threads);
  const int T = std::max(1, threads);

  // per-worker partial normal systems for every shell
  struct ShellSystem {
    Eigen::MatrixXcd AHA;
    Eigen::VectorXcd rhs;
  };
  std::vector<std::vector<ShellSystem>> partial(
      T, std::vector<ShellSystem>(grid.K));
  for (int w = 0; w < T; ++w)
    for (int k = 1; k <= grid.K; ++k) {
      const int U = (Q + 1) * grid.shell_size(k);
      partial[w][k - 1].AHA = Eigen::MatrixXcd::Zero(U, U);
      partial[w][k - 1].rhs = Eigen::VectorXcd::Zero(U);
    }

  // static contiguous split over images
  std::vector<std::thread> pool;
  const int chunk = (n_img + T - 1) / T;
  auto worker = [&](int w) {
    const int lo = w * chunk, hi = std::min(n_img, lo + chunk);
    std::vector<cplx> b;       // one row's (n,m') coefficients
    std::vector<int> nz;       // nonzero positions of b
    Eigen::MatrixXcd g;        // per-image per-shell Gram
    Eigen::VectorXcd r;
    for (int i = lo; i < hi; ++i) {
      RotRestrict rr = RotRestrict::build(L, labels[i].rot);
      const cplx* img = circles.image(i);
      for (int k = 1; k <= grid.K; ++k) {
        const int p = grid.band(k);
        const int s = grid.shell_size(k);
        g.setZero(s, s);
        r.setZero(s);
        b.assign(s, cplx(0, 0));
        for (int m = -p; m <= p; ++m) {
          nz.clear();
          for (int n = std::abs(m); n <= p; ++n) {
            const double y = rr.eq[static_cast<std::size_t>(n) * n + n + m];
            if (y == 0.0) continue;
            const WignerBlock& Dn = rr.D[n];
            for (int mp = -n; mp <= n; ++mp) {
              const int idx = n * n + n + mp;
              b[idx] = y * Dn.at(m, mp);
              nz.push_back(idx);
            }
          }
          if (nz.empty()) continue;
          const cplx y_m = img[grid.circle_offset(k) + (m + p)];
          for (std::size_t ai = 0; ai < nz.size(); ++ai) {
            const int ia = nz[ai];
            const cplx ca = std::conj(b[ia]);
            r[ia] += ca * y_m;
            for (std::size_t bi = 0; bi <= ai; ++bi)
              g(ia, nz[bi]) += ca * b[nz[bi]];
          }
          for (int idx : nz) b[idx] = cplx(0, 0);
        }
        // scatter the rank-(2p+1) Gram into the q-blocks
        ShellSystem& sys = partial[w][k - 1];
        for (int q = 0; q <= Q; ++q) {
          const double pq = pb[i][q];
          sys.rhs.segment(q * s, s) += pq * r;
          for (int qp = 0; qp <= q; ++qp) {
            const double c = pq * pb[i][qp];
            sys.AHA.block(q * s, qp * s, s, s) += c * g;
          }
        }
      }
    }
  };
  if (T == 1) {
    worker(0);
  } else {
    for (int w = 0; w < T; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
  for (int k = 1; k <= grid.K; ++k) {
    const int s = grid.shell_size(k);
    const int U = (Q + 1) * s;
    Eigen::MatrixXcd AHA = Eigen::MatrixXcd::Zero(U, U);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(U);
    for (int w = 0; w < T; ++w) {
      AHA += partial[w][k - 1].AHA;
      rhs += partial[w][k - 1].rhs;
    }
    // stored lower within q-blocks and lower block-triangular in q; mirror up
    for (int q = 0; q <= Q; ++q)
      for (int qp = 0; qp <= q; ++qp) {
        auto blk = AHA.block(q * s, qp * s, s, s);
        Eigen::MatrixXcd full =
            Eigen::MatrixXcd(blk.template selfadjointView<Eigen::Lower>());
        AHA.block(q * s, qp * s, s, s) = full;
        if (q != qp) AHA.block(qp * s, q * s, s, s) = full.adjoint();
      }
    AHA.diagonal().array() += ridge;

    Eigen::LDLT<Eigen::MatrixXcd> ldlt(AHA);
    const auto& dvec = ldlt.vectorD();
    double dmax = 0.0, dmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < dvec.size(); ++j) {
      dmax = std::max(dmax, std::fabs(dvec[j]));
      dmin = std::min(dmin, std::fabs(dvec[j]));
    }
    if (ldlt.info() != Eigen::Success || !(dmax > 0) || dmin <= 1e-12 * dmax)
      throw std::runtime_error(
          "solve_known_assignments: rank-deficient normal system on shell " +
          std::to_string(k) + "; raise the ridge lambda");
    Eigen::VectorXcd x = ldlt.solve(rhs);
    for (int q = 0; q <= Q; ++q)
      for (int j = 0; j < s; ++j)
        hv.data[hv.block_offset(q, k) + j] = x[q * s + j];
  }

  // DC profile: small real least squares over q
  Eigen::MatrixXd Mdc = Eigen::MatrixXd::Zero(Q + 1, Q + 1);
  Eigen::VectorXd rdc = Eigen::VectorXd::Zero(Q + 1);
  for (int i = 0; i < n_img; ++i) {
    for (int q = 0; q <= Q; ++q) {
      rdc[q] += pb[i][q] * circles.dc[i];
      for (int qp = 0; qp <= Q; ++qp) Mdc(q, qp) += pb[i][q] * pb[i][qp];
    }
  }
  Mdc.diagonal().array() += ridge;
  Eigen::VectorXd xdc = Mdc.ldlt().solve(rdc);
  for (int q = 0; q <= Q; ++q) hv.dc[q] = xdc[q];
  return hv;
}

}  // namespace hypermol
