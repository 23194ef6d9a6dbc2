#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace arraycal {

// Dense types, templated on scalar in the Eigen style. Everything downstream
// (scenarios, solvers, file I/O) instantiates the double aliases.
template <typename Scalar> using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using RowVec3 = Eigen::Matrix<Scalar, 1, 3>;
template <typename Scalar> using Mat48 = Eigen::Matrix<Scalar, 4, 8>;
template <typename Scalar> using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using RowVec3d = RowVec3<double>;
using Mat48d = Mat48<double>;
using VecXd = VecX<double>;
using MatXd = MatX<double>;

// Source coincident (or numerically coincident) with an array position; the
// measurement model divides by that distance.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ill-formed input: nonpositive sound speed, zero direction vector,
// non-positive-definite covariance, inconsistent dimensions, ...
class InvalidConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace arraycal
