#pragma once

#include <cstdint>
#include <vector>

#include "arraycal/geometry.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

/// Ground-truth world: N static arrays (index 0 is the reference, pinned to
/// zero), a moving source emitting at steps 1..K, timing, and a seed for
/// measurement synthesis.
struct Scenario {
  std::vector<ArrayExtrinsicsd> arrays;
  std::vector<Vec3d> trajectory;  // s^1 .. s^K, reference-frame coordinates
  double dt = 1.0;                // seconds between consecutive emissions
  double c = 343.0;               // speed of sound, m/s
  std::uint64_t seed = 0;

  int num_arrays() const { return static_cast<int>(arrays.size()); }
  int num_steps() const { return static_cast<int>(trajectory.size()); }

  /// Throws InvalidConfig / DegenerateGeometry if any structural invariant is
  /// violated (reference array nonzero, duplicate array positions, K < 1, or
  /// a trajectory point coinciding with an array).
  void validate() const;
};

/// Returns a copy restricted to the first `steps` emissions.
Scenario prefix(const Scenario& sc, int steps);

/// Measurement noise: P for the stacked TDOA/DOA vector of one step
/// (4(N-1) square), Q for one relative-displacement measurement (3x3).
struct NoiseModel {
  MatXd P;
  Mat3d Q;

  /// Block-diagonal P with sigma_tdoa on TDOA rows and sigma_doa on DOA rows,
  /// Q = sigma_odometry^2 * I.
  static NoiseModel diagonal(int num_arrays, double sigma_tdoa = 1e-4,
                             double sigma_doa = 0.01,
                             double sigma_odometry = 1e-3);

  /// All-zero covariances; synthesize() treats this as the exact noise-free
  /// limit (intended for tests and noise-free pipelines).
  static NoiseModel zero(int num_arrays);

  bool is_zero() const { return P.isZero(0) && Q.isZero(0); }

  /// Throws InvalidConfig unless P and Q are symmetric positive definite
  /// (checked by Cholesky) with dimensions matching num_arrays.
  void validate(int num_arrays) const;
};

/// Stacked noisy measurements: per step y^k = z^k + v^k with
/// z^k = [T_21; d_21; ...; T_N1; d_N1], plus relative displacements
/// s_delta^k = s^{k+1} - s^k + w^k for k = 1..K-1.
struct MeasurementSet {
  int num_arrays = 0;
  int num_steps = 0;
  std::vector<VecXd> y;        // K entries, each 4(N-1)
  std::vector<Vec3d> s_delta;  // K-1 entries

  /// Combined observation vector [y^1; s_delta^1; ...; s_delta^{K-1}; y^K].
  VecXd stacked() const;
};

/// Ideal (noise-free) stacked TDOA/DOA vector z^k for step k (1-based).
VecXd ideal_measurement(const Scenario& sc, int step);

/// Noise-free MeasurementSet: y^k = z^k exactly, s_delta from the trajectory.
MeasurementSet measure_ideal(const Scenario& sc);

/// Draws noisy measurements. Deterministic for a fixed (scenario, seed): the
/// per-step noise is seeded by (seed, step), independent of evaluation order.
/// A NoiseModel with all-zero P and Q short-circuits to measure_ideal.
MeasurementSet synthesize(const Scenario& sc, const NoiseModel& nm);

// ---------------------------------------------------------------------------
// Trajectory generators
// ---------------------------------------------------------------------------

struct TrajectoryParams {
  int steps = 10;
  double speed = 0.1;  // m/s
  double dt = 1.0;     // s between emissions
  Vec3d start = Vec3d(1.2, 0.9, 0.7);
  int phase = 0;  // offset into the direction cycle; gives distinct paths
};

/// Generic 3D zig-zag: per-step direction changes drawn from a fixed cycle of
/// linearly independent directions, so the affine hull of the points is full
/// 3D once K >= 4 and the path is neither collinear with the origin nor stuck
/// in one of the degenerate plane families.
std::vector<Vec3d> gen_observable_trajectory(const TrajectoryParams& p);

/// s^k = k * direction: collinear with the origin of the reference frame.
std::vector<Vec3d> gen_collinear_origin(int steps, const Vec3d& direction);

enum class PlaneFamily { XEqAlphaY, XEqBetaZ, YEqGammaZ };

/// In-plane 2D zig-zag satisfying the plane constraint exactly
/// (x = coeff*y, x = coeff*z, or y = coeff*z).
std::vector<Vec3d> gen_planar(int steps, PlaneFamily family, double coeff);

/// s^k = arr.position + k * direction: collinear with the given array.
std::vector<Vec3d> gen_collinear_with_array(int steps,
                                            const ArrayExtrinsicsd& arr,
                                            const Vec3d& direction);

// ---------------------------------------------------------------------------
// Extrinsics generator
// ---------------------------------------------------------------------------

struct ExtrinsicsBounds {
  double pos_min = -3.0;
  double pos_max = 3.0;
  double min_separation = 0.5;  // between arrays and from the origin
  double tau_max = 0.1;         // s
  double delta_max = 1e-4;      // s/s
  // Exclusion half-width around theta_y = pi/2; 0 allows the gimbal angle.
  double theta_y_margin = 0.0;
};

/// Random extrinsics for n arrays; entry 0 is the all-zero reference.
/// Deterministic for a fixed seed.
std::vector<ArrayExtrinsicsd> random_extrinsics(int n,
                                                const ExtrinsicsBounds& bounds,
                                                std::uint64_t seed);

}  // namespace arraycal
