#pragma once

#include <cmath>
#include <string>

#include "arraycal/euler.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

// Below this separation (meters) a source/array pair is treated as
// coincident; every measurement and Jacobian term divides by the distance.
inline constexpr double kCoincidenceEps = 1e-12;

/// Unknowns of one microphone array: position in the reference frame, frame
/// orientation, start time offset tau (s) and clock drift rate delta (s/s).
/// The reference array (index 0 of a scenario) has all fields zero.
template <typename Scalar>
struct ArrayExtrinsics {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();
  EulerAngles<Scalar> euler{};
  Scalar tau{0};
  Scalar delta{0};

  static ArrayExtrinsics reference() { return ArrayExtrinsics{}; }

  bool is_zero() const {
    return position.isZero(0) && euler.theta_x == Scalar(0) &&
           euler.theta_y == Scalar(0) && euler.theta_z == Scalar(0) &&
           tau == Scalar(0) && delta == Scalar(0);
  }
};

using ArrayExtrinsicsd = ArrayExtrinsics<double>;

/// Euclidean source/array distance. Throws DegenerateGeometry when the two
/// points coincide (within kCoincidenceEps). Accepts Eigen expressions.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar distance(const Eigen::MatrixBase<DerivedA>& source,
                                   const Eigen::MatrixBase<DerivedB>& array_pos) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar d = (source - array_pos).norm();
  if (!(d > Scalar(kCoincidenceEps))) {
    throw DegenerateGeometry("source coincides with array position (d = " +
                             std::to_string(static_cast<double>(d)) + ")");
  }
  return d;
}

/// Direction of the source in the array's local frame:
/// R^T * (s - p) / ||s - p||. Unit norm by construction.
template <typename Scalar, typename Derived>
Vec3<Scalar> doa(const ArrayExtrinsics<Scalar>& arr,
                 const Eigen::MatrixBase<Derived>& source) {
  const Scalar d = distance(source, arr.position);
  const Mat3<Scalar> r = rotation_from_euler(arr.euler);
  return r.transpose() * ((source - arr.position) / d);
}

/// Time difference of arrival between array i and the reference array at
/// emission step k (k >= 1):
///   d_i/c - d_ref/c + tau_i + k*dt*delta_i.
/// ref_traj_dist is the source distance to the reference array at step k.
template <typename Scalar, typename Derived>
Scalar tdoa(const ArrayExtrinsics<Scalar>& arr, Scalar ref_traj_dist,
            const Eigen::MatrixBase<Derived>& source, int step, Scalar dt,
            Scalar c) {
  if (!(c > Scalar(0))) {
    throw InvalidConfig("speed of sound must be positive");
  }
  if (step < 1) {
    throw InvalidConfig("emission step index must be >= 1");
  }
  const Scalar d = distance(source, arr.position);
  return d / c - ref_traj_dist / c + arr.tau +
         Scalar(step) * dt * arr.delta;
}

}  // namespace arraycal
