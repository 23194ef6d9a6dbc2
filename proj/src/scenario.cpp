#include "arraycal/scenario.hpp"

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <string>

#include "arraycal/rng.hpp"

namespace arraycal {

namespace {

// Stream ids for per-step seed derivation.
constexpr std::uint64_t kStreamMeasurement = 1;
constexpr std::uint64_t kStreamOdometry = 2;
constexpr std::uint64_t kStreamExtrinsics = 3;

}  // namespace

void Scenario::validate() const {
  if (num_arrays() < 2) {
    throw InvalidConfig("scenario needs at least two arrays");
  }
  if (!arrays.front().is_zero()) {
    throw InvalidConfig("reference array (index 0) must have all-zero extrinsics");
  }
  for (int i = 0; i < num_arrays(); ++i) {
    for (int j = i + 1; j < num_arrays(); ++j) {
      if ((arrays[i].position - arrays[j].position).norm() <= kCoincidenceEps) {
        throw InvalidConfig("arrays " + std::to_string(i) + " and " +
                            std::to_string(j) + " share a position");
      }
    }
  }
  if (num_steps() < 1) {
    throw InvalidConfig("trajectory must contain at least one emission");
  }
  if (!(dt > 0.0)) throw InvalidConfig("dt must be positive");
  if (!(c > 0.0)) throw InvalidConfig("speed of sound must be positive");
  for (int k = 0; k < num_steps(); ++k) {
    for (int i = 0; i < num_arrays(); ++i) {
      if ((trajectory[k] - arrays[i].position).norm() <= kCoincidenceEps) {
        throw DegenerateGeometry("trajectory point " + std::to_string(k + 1) +
                                 " coincides with array " + std::to_string(i));
      }
    }
  }
}

Scenario prefix(const Scenario& sc, int steps) {
  if (steps < 1 || steps > sc.num_steps()) {
    throw InvalidConfig("prefix length out of range");
  }
  Scenario out = sc;
  out.trajectory.assign(sc.trajectory.begin(), sc.trajectory.begin() + steps);
  return out;
}

NoiseModel NoiseModel::diagonal(int num_arrays, double sigma_tdoa,
                                double sigma_doa, double sigma_odometry) {
  const int m = 4 * (num_arrays - 1);
  NoiseModel nm;
  nm.P = MatXd::Zero(m, m);
  for (int i = 0; i < num_arrays - 1; ++i) {
    nm.P(4 * i, 4 * i) = sigma_tdoa * sigma_tdoa;
    for (int r = 1; r < 4; ++r) {
      nm.P(4 * i + r, 4 * i + r) = sigma_doa * sigma_doa;
    }
  }
  nm.Q = sigma_odometry * sigma_odometry * Mat3d::Identity();
  return nm;
}

NoiseModel NoiseModel::zero(int num_arrays) {
  NoiseModel nm;
  nm.P = MatXd::Zero(4 * (num_arrays - 1), 4 * (num_arrays - 1));
  nm.Q = Mat3d::Zero();
  return nm;
}

void NoiseModel::validate(int num_arrays) const {
  const int m = 4 * (num_arrays - 1);
  if (P.rows() != m || P.cols() != m) {
    throw InvalidConfig("P must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  if (!P.isApprox(P.transpose())) throw InvalidConfig("P must be symmetric");
  if (!Q.isApprox(Q.transpose())) throw InvalidConfig("Q must be symmetric");
  if (Eigen::LLT<MatXd>(P).info() != Eigen::Success) {
    throw InvalidConfig("P is not positive definite");
  }
  if (Eigen::LLT<Mat3d>(Q).info() != Eigen::Success) {
    throw InvalidConfig("Q is not positive definite");
  }
}

VecXd MeasurementSet::stacked() const {
  const int m = 4 * (num_arrays - 1);
  VecXd out(m * num_steps + 3 * (num_steps - 1));
  Eigen::Index at = 0;
  for (int k = 0; k < num_steps; ++k) {
    out.segment(at, m) = y[k];
    at += m;
    if (k + 1 < num_steps) {
      out.segment<3>(at) = s_delta[k];
      at += 3;
    }
  }
  return out;
}

VecXd ideal_measurement(const Scenario& sc, int step) {
  if (step < 1 || step > sc.num_steps()) {
    throw InvalidConfig("step index out of range");
  }
  const Vec3d& s = sc.trajectory[step - 1];
  double ref_dist;
  try {
    ref_dist = distance(s, sc.arrays[0].position);
  } catch (const DegenerateGeometry&) {
    throw DegenerateGeometry("step " + std::to_string(step) +
                             ": source coincides with reference array");
  }
  const int n = sc.num_arrays();
  VecXd z(4 * (n - 1));
  for (int i = 1; i < n; ++i) {
    try {
      z(4 * (i - 1)) = tdoa(sc.arrays[i], ref_dist, s, step, sc.dt, sc.c);
      z.segment<3>(4 * (i - 1) + 1) = doa(sc.arrays[i], s);
    } catch (const DegenerateGeometry&) {
      throw DegenerateGeometry("step " + std::to_string(step) +
                               ": source coincides with array " +
                               std::to_string(i));
    }
  }
  return z;
}

MeasurementSet measure_ideal(const Scenario& sc) {
  MeasurementSet ms;
  ms.num_arrays = sc.num_arrays();
  ms.num_steps = sc.num_steps();
  ms.y.reserve(ms.num_steps);
  for (int k = 1; k <= ms.num_steps; ++k) {
    ms.y.push_back(ideal_measurement(sc, k));
  }
  ms.s_delta.reserve(ms.num_steps - 1);
  for (int k = 0; k + 1 < ms.num_steps; ++k) {
    ms.s_delta.push_back(sc.trajectory[k + 1] - sc.trajectory[k]);
  }
  return ms;
}

MeasurementSet synthesize(const Scenario& sc, const NoiseModel& nm) {
  sc.validate();
  MeasurementSet ms = measure_ideal(sc);
  if (nm.is_zero()) return ms;  // test-mode exact limit

  nm.validate(sc.num_arrays());
  const MatXd chol_p = Eigen::LLT<MatXd>(nm.P).matrixL();
  const Mat3d chol_q = Eigen::LLT<Mat3d>(nm.Q).matrixL();

  for (int k = 0; k < ms.num_steps; ++k) {
    GaussianStream g(derive_seed(sc.seed, kStreamMeasurement, k + 1));
    ms.y[k] += chol_p * g.next_vector(ms.y[k].size());
  }
  for (int k = 0; k + 1 < ms.num_steps; ++k) {
    GaussianStream g(derive_seed(sc.seed, kStreamOdometry, k + 1));
    ms.s_delta[k] += chol_q * g.next_vector(3);
  }
  return ms;
}

std::vector<Vec3d> gen_observable_trajectory(const TrajectoryParams& p) {
  if (p.steps < 1) throw InvalidConfig("steps must be >= 1");
  if (!(p.speed > 0.0) || !(p.dt > 0.0)) {
    throw InvalidConfig("speed and dt must be positive");
  }
  // Linearly independent direction cycle; any three consecutive entries span
  // 3D, so by K = 4 points the affine hull is full-dimensional.
  static const std::array<Vec3d, 4> kDirections = {
      Vec3d(1.0, 0.3, -0.2).normalized(),
      Vec3d(-0.2, 1.0, 0.35).normalized(),
      Vec3d(0.25, -0.3, 1.0).normalized(),
      Vec3d(0.8, 0.7, -0.45).normalized(),
  };
  std::vector<Vec3d> traj;
  traj.reserve(p.steps);
  traj.push_back(p.start);
  const double step_len = p.speed * p.dt;
  for (int k = 1; k < p.steps; ++k) {
    const Vec3d& dir = kDirections[(k - 1 + p.phase) % kDirections.size()];
    traj.push_back(traj.back() + step_len * dir);
  }
  // Construction check: full-dimensional affine hull once enough points exist.
  if (p.steps >= 4) {
    MatXd centered(3, p.steps);
    Vec3d mean = Vec3d::Zero();
    for (const auto& s : traj) mean += s;
    mean /= double(p.steps);
    for (int k = 0; k < p.steps; ++k) centered.col(k) = traj[k] - mean;
    Eigen::JacobiSVD<MatXd> svd(centered);
    if (svd.singularValues()(2) < 1e-9) {
      throw InvalidConfig("zig-zag trajectory degenerated to a plane");
    }
  }
  return traj;
}

std::vector<Vec3d> gen_collinear_origin(int steps, const Vec3d& direction) {
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  if (direction.norm() <= kCoincidenceEps) {
    throw InvalidConfig("direction must be nonzero");
  }
  std::vector<Vec3d> traj;
  traj.reserve(steps);
  for (int k = 1; k <= steps; ++k) traj.push_back(double(k) * direction);
  return traj;
}

std::vector<Vec3d> gen_planar(int steps, PlaneFamily family, double coeff) {
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  // 2D zig-zag in the free coordinates (u, v); the constrained coordinate is
  // computed as coeff * (its partner) so the plane equation holds exactly.
  static const std::array<Eigen::Vector2d, 3> kDirections = {
      Eigen::Vector2d(1.0, 0.35).normalized(),
      Eigen::Vector2d(-0.3, 1.0).normalized(),
      Eigen::Vector2d(1.0, -0.6).normalized(),
  };
  double u = 0.8, v = 0.6;
  std::vector<Vec3d> traj;
  traj.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    if (k > 0) {
      const Eigen::Vector2d& d = kDirections[(k - 1) % kDirections.size()];
      u += 0.1 * d.x();
      v += 0.1 * d.y();
    }
    switch (family) {
      case PlaneFamily::XEqAlphaY:
        traj.emplace_back(coeff * u, u, v);
        break;
      case PlaneFamily::XEqBetaZ:
        traj.emplace_back(coeff * v, u, v);
        break;
      case PlaneFamily::YEqGammaZ:
        traj.emplace_back(u, coeff * v, v);
        break;
    }
  }
  return traj;
}

std::vector<Vec3d> gen_collinear_with_array(int steps,
                                            const ArrayExtrinsicsd& arr,
                                            const Vec3d& direction) {
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  if (direction.norm() <= kCoincidenceEps) {
    throw InvalidConfig("direction must be nonzero");
  }
  std::vector<Vec3d> traj;
  traj.reserve(steps);
  for (int k = 1; k <= steps; ++k) {
    traj.push_back(arr.position + double(k) * direction);
  }
  return traj;
}

std::vector<ArrayExtrinsicsd> random_extrinsics(int n,
                                                const ExtrinsicsBounds& bounds,
                                                std::uint64_t seed) {
  if (n < 2) throw InvalidConfig("need at least two arrays");
  SplitMix64 rng(derive_seed(seed, kStreamExtrinsics, 0));
  std::vector<ArrayExtrinsicsd> arrays;
  arrays.push_back(ArrayExtrinsicsd::reference());
  const double pi = EIGEN_PI;
  for (int i = 1; i < n; ++i) {
    ArrayExtrinsicsd a;
    // Rejection-sample a position separated from the origin and from the
    // arrays placed so far.
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) {
        throw InvalidConfig("could not place arrays with the requested separation");
      }
      a.position = Vec3d(rng.next_in(bounds.pos_min, bounds.pos_max),
                         rng.next_in(bounds.pos_min, bounds.pos_max),
                         rng.next_in(bounds.pos_min, bounds.pos_max));
      bool ok = true;
      for (const auto& other : arrays) {
        if ((a.position - other.position).norm() < bounds.min_separation) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
    double ty = rng.next_in(0.0, pi);
    if (bounds.theta_y_margin > 0.0) {
      while (std::abs(ty - pi / 2) < bounds.theta_y_margin) {
        ty = rng.next_in(0.0, pi);
      }
    }
    a.euler = EulerAnglesd::normalized(rng.next_in(0.0, 2 * pi), ty,
                                       rng.next_in(0.0, 2 * pi));
    a.tau = rng.next_in(0.0, bounds.tau_max);
    a.delta = rng.next_in(0.0, bounds.delta_max);
    arrays.push_back(a);
  }
  return arrays;
}

}  // namespace arraycal
