#pragma once

#include "hypermol/hypervolume.hpp"

namespace hypermol {

/// |Spearman rank correlation| of (t_true, t_est) pairs. Invariant under
/// strictly monotone maps of either coordinate and under t -> 1-t. Throws on
/// fewer than 3 pairs or a constant column.
double spearman_abs(const std::vector<std::pair<double, double>>& pairs);

/// Mapping data behind the true-vs-estimated parameter scatter plots.
struct ParamMapping {
  std::vector<std::pair<double, double>> pairs;  // (t_true, t_est)
  std::vector<int> histogram;                    // marginal of t_est
};

ParamMapping build_param_mapping(const std::vector<double>& t_true,
                                 const std::vector<double>& t_est, int bins = 20);

struct AlignResult {
  Rotation g;
  bool reflected = false;
  bool flipped_t = false;
  double residual = 0.0;
};

/// Grid-plus-refine search over SO(3) x {identity, reflection} x {t, 1-t}
/// for the transform of hvA that best matches hvB in shell-coefficient
/// least squares over the given t samples.
AlignResult align_global(const HyperVolumeCoeffs& hvA,
                         const HyperVolumeCoeffs& hvB,
                         const std::vector<double>& t_samples, int threads = 0);

/// Apply the transform found by align_global to a single instance.
VolumeShellCoeffs apply_alignment(const VolumeShellCoeffs& vol,
                                  const AlignResult& ar);

/// Parity in the Fourier domain: v_{k,l,m} -> (-1)^l v_{k,l,m}.
VolumeShellCoeffs reflect_volume(const VolumeShellCoeffs& vol);
HyperVolumeCoeffs rotate_hypervolume(const HyperVolumeCoeffs& hv,
                                     const Rotation& rot);

/// Per-shell Re<A_k,B_k> / (|A_k||B_k|); NaN where a shell is zero.
std::vector<double> shell_correlation(const VolumeShellCoeffs& volA,
                                      const VolumeShellCoeffs& volB);

struct DetectorResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  bool flagged = false;  // p < 0.001
  // measure of the smallest union of histogram bins holding 95% of the
  // mass; ~1 for a uniform spread, ~0 when the mapping collapses
  double used_range = 1.0;
  int bins = 20;
};

/// Chi-square test of the B-bin histogram of t_est against uniform, plus the
/// used-range statistic that catches reconstructions occupying only part of
/// the parameter interval.
DetectorResult degenerate_param_detector(const std::vector<double>& t_est,
                                         int bins = 20);

}  // namespace hypermol
