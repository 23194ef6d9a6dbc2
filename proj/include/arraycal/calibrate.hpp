#pragma once

#include <optional>
#include <vector>

#include "arraycal/jacobian.hpp"
#include "arraycal/observability.hpp"
#include "arraycal/scenario.hpp"
#include "arraycal/state.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

/// Weighted least-squares problem over the joint state: minimize
/// ||m - g(x)||^2 weighted by the inverse measurement covariance.
struct CalibrationProblem {
  MeasurementSet measurements;
  NoiseModel noise;   // weighting; must be positive definite
  double dt = 1.0;
  double c = 343.0;
  VecXd initial_guess;

  StateLayout layout() const {
    return StateLayout{measurements.num_arrays, measurements.num_steps};
  }
  void validate() const;
};

/// Residual m - g(x) in the combined observation order.
VecXd residual(const VecXd& x, const CalibrationProblem& prob);

/// r^T W^{-1} r via blockwise Cholesky solves.
double weighted_cost(const VecXd& r, const CalibrationProblem& prob);

struct SolveOptions {
  double gradient_tol = 1e-10;   // on ||J^T W^{-1} r||
  double step_tol = 1e-12;       // on the relative step norm
  // Relative cost improvement of an accepted step below which the iterate
  // counts as converged. Heavily weighted noisy problems reach the
  // double-precision resolution of the cost long before the gradient norm
  // reaches gradient_tol.
  double cost_tol = 1e-12;
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double damping_factor = 10.0;  // multiply on reject, divide on accept
  double max_damping = 1e12;
};

enum class SolveStatus {
  Converged,
  NonConvergence,            // iteration budget exhausted; best iterate kept
  SingularNormalEquations,   // damping escalation exhausted
};

struct IterationRecord {
  int iteration;
  double cost;
  double damping;
  double gradient_norm;
};

struct CalibrationResult {
  VecXd estimate;
  double final_cost = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::NonConvergence;
  bool converged = false;
  // Inverse FIM at the estimate; absent when the FIM is rank deficient.
  std::optional<MatXd> covariance;
  RankReport rank_report;  // evaluated at the estimate
  std::vector<IterationRecord> log;
};

/// Damped Gauss-Newton with multiplicative damping on the identity. Accepted
/// steps never increase the weighted cost; Euler angles are wrapped modulo
/// 2*pi after each accepted step (the model is periodic, so the cost is
/// unchanged). Trial states with degenerate geometry count as rejections.
CalibrationResult solve(const CalibrationProblem& prob,
                        const SolveOptions& opts = {});

struct FimCovariance {
  bool singular = false;
  int rank = 0;
  MatXd covariance;  // inverse FIM when nonsingular
  MatXd null_basis;  // unidentifiable directions when singular
};

/// Inverse FIM as the parameter-covariance lower bound; on numerical rank
/// deficiency returns the null-space basis instead (unobservability is a
/// result, not an error).
FimCovariance covariance_from_fim(const JacobianBundle& bundle,
                                  const NoiseModel& nm,
                                  const RankOptions& opts = {});

// --------------------------------------------------------------------------
// Initial-guess builders
// --------------------------------------------------------------------------

struct Perturbation {
  double position = 0.2;  // m, arrays and sources
  double angle = 0.1;     // rad
  double tau = 0.02;      // s
  double delta = 2e-5;    // s/s
};

/// Ground truth plus uniform perturbations in [-a, a] per field (testing).
VecXd initial_guess_perturbed(const Scenario& sc, const Perturbation& p,
                              std::uint64_t seed);

/// Dead reckoning: sources from the cumulative displacement sum starting at
/// s^1 = 0, all extrinsics zero.
VecXd initial_guess_dead_reckoning(const MeasurementSet& ms);

}  // namespace arraycal
