#pragma once

#include <cmath>

#include "arraycal/types.hpp"

namespace arraycal {

template <typename Scalar>
constexpr Scalar two_pi() {
  return Scalar(2) * Scalar(EIGEN_PI);
}

/// Wraps an angle into [0, 2*pi).
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  Scalar w = std::fmod(a, two_pi<Scalar>());
  if (w < Scalar(0)) w += two_pi<Scalar>();
  // fmod can return exactly 2*pi after the correction when a is a tiny
  // negative number.
  if (w >= two_pi<Scalar>()) w = Scalar(0);
  return w;
}

/// Euler angles of an array frame. The rotation they parameterize is
/// R = Rz(theta_z) * Ry(theta_y) * Rx(theta_x), so that the frame transform
/// applied to world vectors is R^T = Rx^T * Ry^T * Rz^T.
///
/// Canonical parameter ranges: theta_x, theta_z in [0, 2*pi), theta_y in
/// [0, pi]. Construction wraps each angle modulo 2*pi; note that a wrapped
/// theta_y in (pi, 2*pi) has no equivalent representation with theta_y in
/// [0, pi] under this composition order, so such values are kept as-is
/// rather than silently aliased to a different rotation.
template <typename Scalar>
struct EulerAngles {
  Scalar theta_x{0};
  Scalar theta_y{0};
  Scalar theta_z{0};

  static EulerAngles normalized(Scalar x, Scalar y, Scalar z) {
    return EulerAngles{wrap_angle(x), wrap_angle(y), wrap_angle(z)};
  }

  bool in_canonical_domain() const {
    return theta_x >= Scalar(0) && theta_x < two_pi<Scalar>() &&
           theta_y >= Scalar(0) && theta_y <= Scalar(EIGEN_PI) &&
           theta_z >= Scalar(0) && theta_z < two_pi<Scalar>();
  }
};

using EulerAnglesd = EulerAngles<double>;

template <typename Scalar>
Mat3<Scalar> rot_x(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << Scalar(1), Scalar(0), Scalar(0),
       Scalar(0), c, -s,
       Scalar(0), s, c;
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_y(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << c, Scalar(0), s,
       Scalar(0), Scalar(1), Scalar(0),
       -s, Scalar(0), c;
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_z(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << c, -s, Scalar(0),
       s, c, Scalar(0),
       Scalar(0), Scalar(0), Scalar(1);
  return r;
}

// d/dt of the elemental rotations, used by the DOA-vs-angle Jacobian block.
template <typename Scalar>
Mat3<Scalar> rot_x_deriv(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << Scalar(0), Scalar(0), Scalar(0),
       Scalar(0), -s, -c,
       Scalar(0), c, -s;
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_y_deriv(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << -s, Scalar(0), c,
       Scalar(0), Scalar(0), Scalar(0),
       -c, Scalar(0), -s;
  return r;
}

template <typename Scalar>
Mat3<Scalar> rot_z_deriv(Scalar t) {
  const Scalar c = std::cos(t), s = std::sin(t);
  Mat3<Scalar> r;
  r << -s, -c, Scalar(0),
       c, -s, Scalar(0),
       Scalar(0), Scalar(0), Scalar(0);
  return r;
}

/// World-to-array rotation, composed as Rz * Ry * Rx.
template <typename Scalar>
Mat3<Scalar> rotation_from_euler(const EulerAngles<Scalar>& e) {
  return Mat3<Scalar>(rot_z(e.theta_z) * rot_y(e.theta_y) * rot_x(e.theta_x));
}

}  // namespace arraycal
