#pragma once

#include "hypermol/imaging.hpp"

namespace hypermol {

/// Per-image estimate of (rotation, t) with its squared matching residual.
struct Assignment {
  int image_index = -1;
  Rotation rot;
  double t = 0.0;
  double score = 0.0;
};

struct MarchingStage {
  int K = 1;       // active shell count
  int Q = 0;       // active parameter order
  int iters = 0;   // SGD iterations in this stage
  double step = 0; // step size
};

/// Stages with non-decreasing K and Q; the first stage must have Q = 0.
struct MarchingSchedule {
  std::vector<MarchingStage> stages;
  void validate(int K_max, int Q_max) const;
};

/// Default alternation: K grows every stage, Q every other stage once
/// heterogeneity starts; step decays geometrically by 0.5 per stage.
MarchingSchedule default_schedule(int K_max, int Q_max, int iters_per_stage,
                                  double base_step);

// ---------------------------------------------------------------------------
// Template matching. A template set holds sphere samples (rotations with
// zero in-plane angle) whose circle coefficients are stored per basis order
// q, so every t sample reuses one rotate-restrict pass; the in-plane angle
// multiplies alpha_{k,m} by e^{-i m gamma} and is scanned by FFT.
// ---------------------------------------------------------------------------
struct TemplateEntry {
  Rotation view;              // alpha = 0
  std::vector<cplx> circ_q;   // (Q_active+1) x circles_size, q-major
  std::vector<cplx> gram;     // (Q_active+1)^2 weighted circle Gram
};

struct TemplateSet {
  ShellGrid grid;
  int K_active = 0;
  int Q_active = 0;
  std::vector<double> t_samples;
  std::vector<TemplateEntry> entries;
};

TemplateSet make_templates(const HyperVolumeCoeffs& hv,
                           const std::vector<Rotation>& views, int K_active,
                           int Q_active, const std::vector<double>& t_samples,
                           int threads = 0);

struct MatchOptions {
  int gamma_grid = 128;  // in-plane FFT grid size (power of two)
  bool refine_t = true;  // 3-point parabola refinement after the grid argmin
};

/// Returns the (rotation, t) minimizing the shell-weighted residual
/// sum_{k<=K_active} r_k sum_m |alpha^tmpl e^{-i m gamma} - alpha^img|^2.
/// Ties break toward the smallest template index, then smallest gamma index.
Assignment match_image(const ImageCircleCoeffs& img, const TemplateSet& templates,
                       const MatchOptions& opts = {});
Assignment match_image_raw(const cplx* img, const ShellGrid& grid,
                           const TemplateSet& templates,
                           const MatchOptions& opts = {});

/// In-plane rotation: prepend R_z(gamma), i.e. (a,b,c) -> (a+gamma, b, c).
Rotation compose_inplane(const Rotation& rot, double gamma);

struct ObjectiveGradient {
  double cost = 0.0;
  std::vector<cplx> grad;  // same shape as hv.data; inactive entries zero
};

/// cost = sum_{k<=K_active} r_k sum_m |[A(rot,t) hv]_{k,m} - img_{k,m}|^2 and
/// its exact gradient in the active coefficients (adjoint of rotate-restrict
/// applied to the residual, scaled by Pbar_q(t)).
ObjectiveGradient objective_and_gradient(const HyperVolumeCoeffs& hv,
                                         const ImageCircleCoeffs& img,
                                         const Rotation& rot, double t,
                                         int K_active, int Q_active);

/// hv <- hv - step * mean gradient over the minibatch; accumulation runs in
/// ascending image order regardless of thread count.
void sgd_step(HyperVolumeCoeffs& hv, const CircleStack& stack,
              const std::vector<Assignment>& minibatch, double step,
              int K_active, int Q_active, int threads = 0);

/// Q = 0 spherically symmetric start: v_{0,k,0,0} = sqrt(4pi) * mean of the
/// images' alpha_{k,0}; everything else zero.
HyperVolumeCoeffs init_spherical_average(const CircleStack& stack,
                                         const ParamBasisSpec& basis);

struct StageDiag {
  int stage = 0, K = 0, Q = 0, iters = 0;
  double step = 0.0;
  double mean_score = 0.0;
  std::vector<int> t_hist;  // histogram of last-seen assignments, 20 bins
  int images_seen = 0;
  int zero_circle_images = 0;  // degenerate inputs matched arbitrarily
};

struct ReconstructOptions {
  ParamBasisSpec basis;
  MarchingSchedule schedule;
  int sphere_samples = 1024;
  int t_samples = 64;
  int minibatch = 64;
  std::uint64_t seed = 1;
  int threads = 0;
  bool stratified_t = true;   // midpoint t grid; false draws t uniformly
  bool reparam_uniform = false;  // rank-uniformize t at stage boundaries
  // relative scale of the random seeding of freshly activated q-slices;
  // without it every t ties exactly at a Q transition and the deterministic
  // tie rule parks all images at the first t sample
  double q_seed_scale = 0.02;
  int final_sphere_samples = 2048;
  MatchOptions match;
};

struct ReconstructResult {
  HyperVolumeCoeffs hv;
  std::vector<Assignment> assignments;  // final full pass, one per image
  std::vector<StageDiag> diagnostics;
};

ReconstructResult reconstruct(const CircleStack& circles,
                              const ReconstructOptions& opts);

/// Known-assignment regularized least squares, per shell over the (q,n,m)
/// coefficients coupling all images; exact normal-equations solve plus a
/// small separate solve for the DC profile.
HyperVolumeCoeffs solve_known_assignments(const CircleStack& circles,
                                          const std::vector<TruthLabel>& labels,
                                          const ShellGrid& grid,
                                          const ParamBasisSpec& basis,
                                          double ridge, int threads = 0);

/// Stack objective at frozen assignments, restricted to the active bands.
double objective_stack(const HyperVolumeCoeffs& hv, const CircleStack& stack,
                       const std::vector<Assignment>& assignments, int K_active,
                       int Q_active);

}  // namespace hypermol
