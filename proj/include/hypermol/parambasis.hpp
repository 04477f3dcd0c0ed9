#pragma once

#include <string>
#include <vector>

#include "hypermol/util.hpp"

namespace hypermol {

// ---------------------------------------------------------------------------
// Heterogeneity-parameter bases on T = [0,1]. Index q runs 0..Q and q = 0 is
// the constant function for every kind.
//
//   legendre : shifted Legendre, L^2[0,1]-orthonormal, Pbar_q(t) =
//              sqrt(2q+1) P_q(2t-1)
//   chebyshev: shifted Chebyshev T_q(2t-1) (expansion basis only, not
//              orthonormal under the uniform weight)
//   haar     : constant, then psi_{n,k}(t) = 2^{n/2} phi(2^n t - k) in
//              breadth-first (n,k) order
// ---------------------------------------------------------------------------

enum class ParamBasisKind { legendre, chebyshev, haar };

struct ParamBasisSpec {
  ParamBasisKind kind = ParamBasisKind::legendre;
  int Q = 0;  // highest index used; Q = 0 means constant-only
};

std::string to_string(ParamBasisKind kind);
ParamBasisKind param_basis_kind_from_string(const std::string& s);

/// Values [Pbar_0(t), ..., Pbar_Q(t)], t in [0,1].
std::vector<double> eval_param_basis(const ParamBasisSpec& spec, double t);

struct Quadrature1D {
  std::vector<double> x, w;
  int n() const { return static_cast<int>(x.size()); }
};

/// Gauss-Legendre nodes/weights on [-1,1]; exact through degree 2n-1.
Quadrature1D gauss_legendre_m11(int n);

/// Gauss-Legendre nodes/weights on [0,1]; weights sum to 1.
Quadrature1D gauss_legendre_01(int n);

}  // namespace hypermol
