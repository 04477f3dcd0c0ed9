#pragma once

#include "hypermol/hypervolume.hpp"

namespace hypermol {

/// Isotropic Gaussian blob whose center follows a polynomial trajectory
/// c(t) = c0 + c1 t + c2 t^2 + c3 t^3, t in [0,1]. Lengths in box units
/// (object supported in [-0.5, 0.5]^3).
struct GaussianBlob {
  double amplitude = 1.0;
  double sigma = 0.05;
  Vec3 c0, c1, c2, c3;

  Vec3 center(double t) const {
    return c0 + c1 * t + c2 * (t * t) + c3 * (t * t * t);
  }
};

struct GaussianBlobPhantom {
  std::vector<GaussianBlob> blobs;

  /// Largest center distance from the origin over a dense t sweep.
  double max_center_radius(int t_steps = 101) const;
};

/// Built-in heterogeneous phantom: a compact body with ears, paws and a tail
/// whose tip swings with t. Instances at t = 0 and t = 1 differ by ~30%
/// relative L2.
GaussianBlobPhantom cat_preset();

/// Fourier transform of the instance at t (convention
/// F(w) = int f(x) e^{-i<w,x>} dx):
///   sum_j a_j (2pi)^{3/2} sigma_j^3 exp(-sigma_j^2 |w|^2 / 2) exp(-i<w, c_j(t)>)
cplx phantom_ft(const GaussianBlobPhantom& ph, double t, const Vec3& omega);

/// Analytic z-projection of the rotated instance, (R o V)(x) = V(R^{-1} x):
/// each blob lands at the first two coordinates of R c_j(t) with amplitude
/// a_j sqrt(2pi) sigma_j. Row-major N x N, pixel (i,j) at
/// x = (i - (N-1)/2) * pixel_size, y likewise with j.
std::vector<double> phantom_projection_image(const GaussianBlobPhantom& ph,
                                             const Rotation& rot, double t,
                                             int N, double pixel_size);

/// Fit the phantom onto the tensor grid: per t-quadrature node evaluate the
/// shell values, project each shell to SH, then project the t-dependence
/// onto the parameter basis. Requires the legendre kind (the projection
/// uses its orthonormality). t_nodes = 0 picks a default of Q + 12.
HyperVolumeCoeffs phantom_to_hypervolume(const GaussianBlobPhantom& ph,
                                         const ShellGrid& grid,
                                         const ParamBasisSpec& basis,
                                         int t_nodes = 0);

/// Shell-projection of a single instance: phantom_ft sampled on each shell's
/// sphere quadrature and projected to band p(k). The per-t leg of the fit.
VolumeShellCoeffs phantom_to_shells(const GaussianBlobPhantom& ph, double t,
                                    const ShellGrid& grid);

}  // namespace hypermol
