#pragma once

#include <vector>

#include "arraycal/geometry.hpp"
#include "arraycal/scenario.hpp"
#include "arraycal/state.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

// Analytic derivative blocks of the stacked TDOA/DOA observation model.
// Notation: delta = s - p (source minus array position), d = ||delta||,
// all expressed in the reference frame.

/// d(TDOA)/d(array position): -delta^T / (c*d). Row norm is 1/c.
template <typename DerivedA, typename DerivedB>
RowVec3<typename DerivedA::Scalar> block_h(
    const Eigen::MatrixBase<DerivedA>& array_pos,
    const Eigen::MatrixBase<DerivedB>& source, typename DerivedA::Scalar c) {
  const auto d = distance(source, array_pos);
  return (-(source - array_pos) / (c * d)).transpose();
}

/// The projection-like factor of the DOA derivative:
/// A = (I - u*u^T)/d with u = delta/d. Rank 2; A*delta = 0.
template <typename DerivedA, typename DerivedB>
Mat3<typename DerivedA::Scalar> doa_projection(
    const Eigen::MatrixBase<DerivedA>& array_pos,
    const Eigen::MatrixBase<DerivedB>& source) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar d = distance(source, array_pos);
  const Vec3<Scalar> u = (source - array_pos) / d;
  return (Mat3<Scalar>::Identity() - u * u.transpose()) / d;
}

/// d(DOA)/d(array position): -R^T * A.
template <typename Scalar, typename Derived>
Mat3<Scalar> block_U(const ArrayExtrinsics<Scalar>& arr,
                     const Eigen::MatrixBase<Derived>& source) {
  const Mat3<Scalar> r = rotation_from_euler(arr.euler);
  return -(r.transpose() * doa_projection(arr.position, source));
}

/// d(DOA)/d(theta_x, theta_y, theta_z): column j is the derivative of
/// Rx^T*Ry^T*Rz^T * delta/d with respect to the j-th angle.
template <typename Scalar, typename Derived>
Mat3<Scalar> block_V(const ArrayExtrinsics<Scalar>& arr,
                     const Eigen::MatrixBase<Derived>& source) {
  const Scalar d = distance(source, arr.position);
  const Vec3<Scalar> delta = source - arr.position;
  const Mat3<Scalar> rx_t = rot_x(arr.euler.theta_x).transpose();
  const Mat3<Scalar> ry_t = rot_y(arr.euler.theta_y).transpose();
  const Mat3<Scalar> rz_t = rot_z(arr.euler.theta_z).transpose();
  Mat3<Scalar> v;
  v.col(0) = rot_x_deriv(arr.euler.theta_x).transpose() * (ry_t * (rz_t * delta));
  v.col(1) = rx_t * (rot_y_deriv(arr.euler.theta_y).transpose() * (rz_t * delta));
  v.col(2) = rx_t * (ry_t * (rot_z_deriv(arr.euler.theta_z).transpose() * delta));
  return v / d;
}

/// 4x8 derivative of [TDOA; DOA] for one array at step k with respect to
/// that array's own parameters [position, euler, tau, delta]:
///   [ h   0    1   k*dt ]
///   [ U   V    0    0   ]
template <typename Scalar, typename Derived>
Mat48<Scalar> block_H(const ArrayExtrinsics<Scalar>& arr,
                      const Eigen::MatrixBase<Derived>& source, int step,
                      Scalar dt, Scalar c) {
  Mat48<Scalar> H = Mat48<Scalar>::Zero();
  H.template block<1, 3>(0, 0) = block_h(arr.position, source, c);
  H(0, 6) = Scalar(1);
  H(0, 7) = Scalar(step) * dt;
  H.template block<3, 3>(1, 0) = block_U(arr, source);
  H.template block<3, 3>(1, 3) = block_V(arr, source);
  return H;
}

/// L^k: 4(N-1) x 8(N-1) block-diagonal stack of the per-array H blocks.
MatXd block_L(const Scenario& sc, int step);

/// T^k: 4(N-1) x 3 derivative of z^k with respect to the source position s^k.
/// Per array: TDOA row -h_i - (s/(c*d_ref))^T, DOA rows -U_i.
MatXd block_T(const Scenario& sc, int step);

/// Full Jacobian of the combined observation vector plus the per-step blocks
/// it was assembled from.
struct JacobianBundle {
  StateLayout layout;
  MatXd J;                 // (4(N-1)K + 3(K-1)) x (8(N-1) + 3K)
  std::vector<MatXd> L;    // K entries
  std::vector<MatXd> T;    // K entries
};

/// Assembles J at the scenario's own state. Measurement rows interleave with
/// odometry rows (-I, +I) exactly in the combined-observation order.
JacobianBundle assemble(const Scenario& sc);

/// Noise-free combined observation g(x) evaluated at the scenario's state,
/// in the same row order as assemble().
VecXd observe(const Scenario& sc);

/// Fisher information J^T W^{-1} J, with W = diag(P, Q, P, Q, ..., P) applied
/// blockwise through Cholesky solves.
MatXd fim(const JacobianBundle& bundle, const NoiseModel& nm);

/// Central-difference Jacobian of observe() at the scenario's state;
/// validation oracle for assemble().
MatXd finite_difference_jacobian(const Scenario& sc, double h = 1e-6);

}  // namespace arraycal
