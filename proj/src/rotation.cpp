#include "hypermol/rotation.hpp"

namespace hypermol {

namespace {

double wrap_2pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  // collapse values that fmod left at the boundary
  if (a >= kTwoPi) a = 0.0;
  return a;
}

}  // namespace

Mat3 Rotation::matrix() const {
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  const double cb = std::cos(beta), sb = std::sin(beta);
  const double cg = std::cos(gamma), sg = std::sin(gamma);
  // R_z(alpha) R_y(beta) R_z(gamma)
  return {ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb,
          sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb,
          -sb * cg,               sb * sg,                 cb};
}

Vec3 Rotation::apply(const Vec3& v) const { return mat3_apply(matrix(), v); }

Vec3 mat3_apply(const Mat3& m, const Vec3& v) {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a[3 * i + k] * b[3 * k + j];
      c[3 * i + j] = s;
    }
  return c;
}

Mat3 mat3_transpose(const Mat3& a) {
  return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

Rotation Rotation::from_matrix(const Mat3& m) {
  // m[2]=ca*sb, m[5]=sa*sb, m[8]=cb, m[6]=-sb*cg, m[7]=sb*sg
  double cb = std::clamp(m[8], -1.0, 1.0);
  double beta = std::acos(cb);
  double sb = std::sin(beta);
  Rotation r;
  r.beta = beta;
  if (sb > 1e-12) {
    r.alpha = wrap_2pi(std::atan2(m[5], m[2]));
    r.gamma = wrap_2pi(std::atan2(m[7], -m[6]));
  } else if (cb > 0) {
    // beta = 0: only alpha+gamma defined; put it all in alpha
    r.beta = 0.0;
    r.alpha = wrap_2pi(std::atan2(m[3], m[0]));
    r.gamma = 0.0;
  } else {
    // beta = pi: only alpha-gamma defined
    r.beta = kPi;
    r.alpha = wrap_2pi(std::atan2(m[3], -m[0]));
    r.gamma = 0.0;
  }
  return r;
}

Rotation Rotation::compose(const Rotation& a, const Rotation& b) {
  return from_matrix(mat3_mul(a.matrix(), b.matrix()));
}

Rotation Rotation::inverse() const {
  return from_matrix(mat3_transpose(matrix()));
}

Rotation random_rotation(std::mt19937_64& gen) {
  double q0 = normal01(gen), q1 = normal01(gen);
  double q2 = normal01(gen), q3 = normal01(gen);
  double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
  if (n < 1e-12) return Rotation::identity();
  q0 /= n; q1 /= n; q2 /= n; q3 /= n;
  Mat3 m = {1 - 2 * (q2 * q2 + q3 * q3), 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2),
            2 * (q1 * q2 + q0 * q3), 1 - 2 * (q1 * q1 + q3 * q3), 2 * (q2 * q3 - q0 * q1),
            2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), 1 - 2 * (q1 * q1 + q2 * q2)};
  return Rotation::from_matrix(m);
}

}  // namespace hypermol
