#pragma once

#include <array>
#include <random>

#include "hypermol/util.hpp"

namespace hypermol {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

/// 3x3 rotation matrix, row major.
using Mat3 = std::array<double, 9>;

// ---------------------------------------------------------------------------
// Element of SO(3).
//
// Convention used throughout: ZYZ intrinsic Euler angles,
//   R(alpha, beta, gamma) = R_z(alpha) * R_y(beta) * R_z(gamma),
// acting actively on vectors, and on functions via
//   (R o f)(x) = f(R^{-1} x).
// alpha, gamma in [0, 2pi), beta in [0, pi].
// ---------------------------------------------------------------------------
struct Rotation {
  double alpha = 0, beta = 0, gamma = 0;

  Mat3 matrix() const;
  Vec3 apply(const Vec3& v) const;

  /// this followed-by semantics: compose(A, B) applies B first, then A
  /// (matrix product A*B).
  static Rotation compose(const Rotation& a, const Rotation& b);
  Rotation inverse() const;

  static Rotation from_matrix(const Mat3& m);
  static Rotation identity() { return {0, 0, 0}; }
};

Vec3 mat3_apply(const Mat3& m, const Vec3& v);
Mat3 mat3_mul(const Mat3& a, const Mat3& b);
Mat3 mat3_transpose(const Mat3& a);

/// Haar-uniform rotation from a normalized Gaussian quaternion.
Rotation random_rotation(std::mt19937_64& gen);

}  // namespace hypermol
