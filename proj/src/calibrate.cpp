#include "arraycal/calibrate.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "arraycal/rng.hpp"

namespace arraycal {

namespace {

// Skeleton scenario carrying only dimensions and timing; the solver swaps
// states in and out of it. Array/trajectory contents are placeholders.
Scenario skeleton(const CalibrationProblem& prob) {
  Scenario sc;
  sc.arrays.assign(prob.measurements.num_arrays, ArrayExtrinsicsd::reference());
  sc.trajectory.assign(prob.measurements.num_steps, Vec3d::Zero());
  sc.dt = prob.dt;
  sc.c = prob.c;
  return sc;
}

struct Weighting {
  Eigen::LLT<MatXd> llt_p;
  Eigen::LLT<Mat3d> llt_q;
  int meas_rows;
  int num_steps;

  explicit Weighting(const CalibrationProblem& prob)
      : llt_p(prob.noise.P),
        llt_q(prob.noise.Q),
        meas_rows(4 * (prob.measurements.num_arrays - 1)),
        num_steps(prob.measurements.num_steps) {}

  VecXd apply_winv(const VecXd& r) const {
    VecXd out(r.size());
    Eigen::Index at = 0;
    for (int k = 1; k <= num_steps; ++k) {
      out.segment(at, meas_rows) = llt_p.solve(r.segment(at, meas_rows));
      at += meas_rows;
      if (k < num_steps) {
        out.segment<3>(at) = llt_q.solve(r.segment<3>(at).eval());
        at += 3;
      }
    }
    return out;
  }

  double cost(const VecXd& r) const { return r.dot(apply_winv(r)); }
};

}  // namespace

void CalibrationProblem::validate() const {
  const int n = measurements.num_arrays;
  const int k_total = measurements.num_steps;
  if (n < 2 || k_total < 1) {
    throw InvalidConfig("measurement set has invalid dimensions");
  }
  if (static_cast<int>(measurements.y.size()) != k_total ||
      static_cast<int>(measurements.s_delta.size()) != k_total - 1) {
    throw InvalidConfig("measurement set is internally inconsistent");
  }
  for (const auto& yk : measurements.y) {
    if (yk.size() != 4 * (n - 1)) {
      throw InvalidConfig("measurement row has wrong dimension");
    }
  }
  noise.validate(n);
  if (initial_guess.size() != layout().dim()) {
    throw InvalidConfig("initial guess has dimension " +
                        std::to_string(initial_guess.size()) + ", expected " +
                        std::to_string(layout().dim()));
  }
}

VecXd residual(const VecXd& x, const CalibrationProblem& prob) {
  const Scenario sc = scenario_with_state(skeleton(prob), x);
  return prob.measurements.stacked() - observe(sc);
}

double weighted_cost(const VecXd& r, const CalibrationProblem& prob) {
  return Weighting(prob).cost(r);
}

CalibrationResult solve(const CalibrationProblem& prob,
                        const SolveOptions& opts) {
  prob.validate();
  const Weighting w(prob);
  const StateLayout layout = prob.layout();
  const Scenario base = skeleton(prob);
  const VecXd m = prob.measurements.stacked();

  CalibrationResult result;
  VecXd x = prob.initial_guess;
  Scenario current = scenario_with_state(base, x);
  VecXd r = m - observe(current);  // degenerate initial guess throws
  double cost = w.cost(r);
  double damping = opts.initial_damping;
  result.status = SolveStatus::NonConvergence;

  int iter = 0;
  bool logged_final = false;
  for (; iter < opts.max_iterations; ++iter) {
    const JacobianBundle bundle = assemble(current);
    const VecXd winv_r = w.apply_winv(r);
    const VecXd gradient = bundle.J.transpose() * winv_r;
    const double gradient_norm = gradient.norm();
    result.log.push_back({iter, cost, damping, gradient_norm});
    if (gradient_norm < opts.gradient_tol) {
      result.status = SolveStatus::Converged;
      logged_final = true;
      break;
    }

    MatXd winv_j(bundle.J.rows(), bundle.J.cols());
    {
      Eigen::Index at = 0;
      for (int k = 1; k <= layout.num_steps; ++k) {
        const int mr = 4 * (layout.num_arrays - 1);
        winv_j.middleRows(at, mr) = w.llt_p.solve(bundle.J.middleRows(at, mr));
        at += mr;
        if (k < layout.num_steps) {
          winv_j.middleRows<3>(at) = w.llt_q.solve(bundle.J.middleRows<3>(at));
          at += 3;
        }
      }
    }
    const MatXd hessian = bundle.J.transpose() * winv_j;

    // Inner damping loop: escalate until a step reduces the cost.
    bool accepted = false;
    while (damping <= opts.max_damping) {
      MatXd damped = hessian;
      damped.diagonal().array() += damping;
      const Eigen::LDLT<MatXd> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        damping *= opts.damping_factor;
        continue;
      }
      const VecXd step = ldlt.solve(gradient);
      if (!step.allFinite()) {
        damping *= opts.damping_factor;
        continue;
      }
      VecXd x_trial = x + step;
      renormalize_angles(x_trial, layout);
      double trial_cost;
      VecXd r_trial;
      Scenario trial_scenario = base;
      try {
        trial_scenario = scenario_with_state(base, x_trial);
        r_trial = m - observe(trial_scenario);
        trial_cost = w.cost(r_trial);
      } catch (const DegenerateGeometry&) {
        damping *= opts.damping_factor;
        continue;
      }
      if (trial_cost <= cost) {
        const double step_norm = step.norm();
        const double improvement = cost - trial_cost;
        x = x_trial;
        current = trial_scenario;
        r = r_trial;
        cost = trial_cost;
        damping = std::max(damping / opts.damping_factor, 1e-15);
        accepted = true;
        if (step_norm < opts.step_tol * (x.norm() + opts.step_tol) ||
            improvement <= opts.cost_tol * cost) {
          result.status = SolveStatus::Converged;
        }
        break;
      }
      damping *= opts.damping_factor;
    }
    if (!accepted) {
      result.status = SolveStatus::SingularNormalEquations;
      ++iter;
      break;
    }
    if (result.status == SolveStatus::Converged) {
      ++iter;
      break;
    }
  }

  result.estimate = x;
  result.final_cost = cost;
  result.iterations = iter;
  result.converged = (result.status == SolveStatus::Converged);
  if (!logged_final) {
    // Record the gradient at the final iterate (the loop logs it at the
    // start of each iteration only).
    const VecXd gradient = assemble(current).J.transpose() * w.apply_winv(r);
    result.log.push_back({iter, cost, damping, gradient.norm()});
  }

  const Scenario at_estimate = scenario_with_state(base, x);
  result.rank_report = rank_trace(at_estimate);
  const FimCovariance cov =
      covariance_from_fim(assemble(at_estimate), prob.noise);
  if (!cov.singular) result.covariance = cov.covariance;
  return result;
}

FimCovariance covariance_from_fim(const JacobianBundle& bundle,
                                  const NoiseModel& nm,
                                  const RankOptions& opts) {
  nm.validate(bundle.layout.num_arrays);
  // Rank of the FIM equals the rank of the whitened Jacobian W^{-1/2} J;
  // working on the latter avoids squaring the condition number.
  const MatXd lp = Eigen::LLT<MatXd>(nm.P).matrixL();
  const Mat3d lq = Eigen::LLT<Mat3d>(nm.Q).matrixL();
  MatXd whitened(bundle.J.rows(), bundle.J.cols());
  const int meas_rows = 4 * (bundle.layout.num_arrays - 1);
  Eigen::Index at = 0;
  for (int k = 1; k <= bundle.layout.num_steps; ++k) {
    whitened.middleRows(at, meas_rows) =
        lp.triangularView<Eigen::Lower>().solve(
            bundle.J.middleRows(at, meas_rows));
    at += meas_rows;
    if (k < bundle.layout.num_steps) {
      whitened.middleRows<3>(at) = lq.triangularView<Eigen::Lower>().solve(
          MatXd(bundle.J.middleRows<3>(at)));
      at += 3;
    }
  }

  FimCovariance out;
  out.rank = numerical_rank(whitened, opts);
  if (out.rank < whitened.cols()) {
    out.singular = true;
    out.null_basis = null_space_basis(whitened, opts);
    return out;
  }
  const MatXd information = fim(bundle, nm);
  out.covariance =
      Eigen::LDLT<MatXd>(information)
          .solve(MatXd::Identity(information.rows(), information.cols()));
  return out;
}

VecXd initial_guess_perturbed(const Scenario& sc, const Perturbation& p,
                              std::uint64_t seed) {
  const StateLayout layout{sc.num_arrays(), sc.num_steps()};
  VecXd x = pack_state(sc);
  SplitMix64 rng(mix_bits(seed + 0x51ab5f1c3ULL));
  for (int i = 1; i < layout.num_arrays; ++i) {
    const int at = layout.array_offset(i);
    for (int c = 0; c < 3; ++c) {
      x[at + c] += rng.next_in(-p.position, p.position);
    }
    for (int c = 3; c < 6; ++c) x[at + c] += rng.next_in(-p.angle, p.angle);
    x[at + 6] += rng.next_in(-p.tau, p.tau);
    x[at + 7] += rng.next_in(-p.delta, p.delta);
  }
  for (int k = 1; k <= layout.num_steps; ++k) {
    const int at = layout.source_offset(k);
    for (int c = 0; c < 3; ++c) {
      x[at + c] += rng.next_in(-p.position, p.position);
    }
  }
  return x;
}

VecXd initial_guess_dead_reckoning(const MeasurementSet& ms) {
  const StateLayout layout{ms.num_arrays, ms.num_steps};
  VecXd x = VecXd::Zero(layout.dim());
  Vec3d s = Vec3d::Zero();
  for (int k = 1; k <= ms.num_steps; ++k) {
    x.segment<3>(layout.source_offset(k)) = s;
    if (k < ms.num_steps) s += ms.s_delta[k - 1];
  }
  return x;
}

}  // namespace arraycal
