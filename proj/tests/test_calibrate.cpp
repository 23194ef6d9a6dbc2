#include <doctest.h>

#include <cmath>

#include "arraycal/calibrate.hpp"
#include "support.hpp"

using namespace arraycal;

namespace {

CalibrationProblem make_problem(const Scenario& sc, const NoiseModel& noise,
                                const NoiseModel& weights) {
  CalibrationProblem prob;
  prob.measurements = synthesize(sc, noise);
  prob.noise = weights;
  prob.dt = sc.dt;
  prob.c = sc.c;
  prob.initial_guess = pack_state(sc);
  return prob;
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("residual is zero at ground truth on noise-free data") {
  const Scenario sc = testsupport::random_scenario(3, 8, 51, /*avoid_gimbal=*/true);
  const CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  const VecXd r = residual(pack_state(sc), prob);
  CHECK(r.cwiseAbs().maxCoeff() == 0.0);
  CHECK(weighted_cost(r, prob) == 0.0);
}

TEST_CASE("scaling the weighting scales the cost inversely") {
  const Scenario sc = testsupport::random_scenario(3, 6, 53);
  CalibrationProblem prob =
      make_problem(sc, NoiseModel::diagonal(3), NoiseModel::diagonal(3));
  VecXd x = prob.initial_guess;
  x[0] += 0.05;  // make the residual nonzero
  const VecXd r = residual(x, prob);
  const double cost = weighted_cost(r, prob);
  CalibrationProblem scaled = prob;
  const double alpha = 4.0;
  scaled.noise.P *= alpha;
  scaled.noise.Q *= alpha;
  CHECK(weighted_cost(r, scaled) == doctest::Approx(cost / alpha).epsilon(1e-12));
}

TEST_CASE("perturbing tau shifts every TDOA residual of that array by -eps") {
  const Scenario sc = testsupport::random_scenario(3, 7, 55);
  const CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  const VecXd x0 = pack_state(sc);
  VecXd x = x0;
  const double eps = 3e-3;
  x[prob.layout().array_offset(1) + 6] += eps;  // tau of array 2
  const VecXd r = residual(x, prob);
  const int meas_rows = 4 * 2;
  for (int k = 0; k < 7; ++k) {
    const int row = (meas_rows + 3) * k;
    CHECK(r[row] == doctest::Approx(-eps).epsilon(1e-9));      // array 2 TDOA
    CHECK(r[row + 4] == doctest::Approx(0.0).epsilon(1e-12));  // array 3 TDOA
  }
}

TEST_CASE("solve from truth converges immediately on noise-free data") {
  const Scenario sc = testsupport::random_scenario(4, 8, 57, /*avoid_gimbal=*/true);
  const CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(4), NoiseModel::diagonal(4));
  const CalibrationResult result = solve(prob);
  CHECK(result.converged);
  CHECK(result.iterations <= 2);
  CHECK(result.final_cost == doctest::Approx(0.0));
}

TEST_CASE("noise-free round trip recovers the truth from a perturbed init") {
  ExtrinsicsBounds bounds;
  bounds.theta_y_margin = 0.25;
  Scenario sc;
  sc.arrays = random_extrinsics(3, bounds, 61);
  TrajectoryParams p;
  p.steps = 8;
  sc.trajectory = gen_observable_trajectory(p);
  sc.validate();

  CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  prob.initial_guess = initial_guess_perturbed(sc, Perturbation{}, 7);
  const CalibrationResult result = solve(prob);
  CHECK(result.converged);
  const VecXd truth = pack_state(sc);
  CHECK((result.estimate - truth).cwiseAbs().maxCoeff() < 1e-6);

  // Accepted steps never increased the cost.
  for (size_t i = 1; i < result.log.size(); ++i) {
    CHECK(result.log[i].cost <= result.log[i - 1].cost);
  }
  REQUIRE(result.covariance.has_value());
  for (int i = 0; i < result.estimate.size(); ++i) {
    CHECK((*result.covariance)(i, i) > 0.0);
  }

  // Gradient at convergence. Checked under unit weighting: with the default
  // 1e-4 TDOA sigma the double-precision floor of ||J^T W^-1 r|| sits at
  // about 1e-8 itself.
  CalibrationProblem unit = prob;
  unit.noise.P = MatXd::Identity(8, 8);
  unit.noise.Q = Mat3d::Identity();
  const CalibrationResult unit_result = solve(unit);
  CHECK(unit_result.converged);
  CHECK(unit_result.log.back().gradient_norm < 1e-8);
  CHECK((unit_result.estimate - truth).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("degenerate scenario: solver flags the deficiency") {
  ExtrinsicsBounds bounds;
  bounds.theta_y_margin = 0.25;
  Scenario sc;
  sc.arrays = random_extrinsics(3, bounds, 63);
  sc.trajectory = gen_collinear_origin(8, Vec3d(0.05, 0.06, 0.07));
  sc.validate();

  CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  prob.initial_guess = initial_guess_perturbed(sc, Perturbation{}, 5);
  const CalibrationResult result = solve(prob);
  // The fit itself may stall or wander in the null space; what matters is
  // that the rank report explains the deficiency and no covariance exists.
  CHECK(!result.rank_report.full_column_rank);
  CHECK(!result.rank_report.violated_conditions.empty());
  CHECK(!result.covariance.has_value());
}

TEST_CASE("covariance_from_fim: observable vs K=4 scenarios") {
  const Scenario sc = testsupport::random_scenario(3, 10, 65, /*avoid_gimbal=*/true);
  const NoiseModel nm = NoiseModel::diagonal(3);
  const FimCovariance cov = covariance_from_fim(assemble(sc), nm);
  if (!cov.singular) {
    for (int i = 0; i < cov.covariance.rows(); ++i) {
      CHECK(cov.covariance(i, i) > 0.0);
    }
  }

  const Scenario k4 = prefix(sc, 4);
  const FimCovariance singular = covariance_from_fim(assemble(k4), nm);
  CHECK(singular.singular);
  CHECK(singular.null_basis.cols() > 0);
  // Null directions really are in the kernel of the FIM.
  const MatXd information = fim(assemble(k4), nm);
  CHECK((information * singular.null_basis).cwiseAbs().maxCoeff() <
        1e-6 * information.cwiseAbs().maxCoeff());
}

TEST_CASE("initial guesses: dead reckoning and perturbation") {
  const Scenario sc = testsupport::random_scenario(3, 6, 67);
  const MeasurementSet ms = synthesize(sc, NoiseModel::zero(3));
  const VecXd x = initial_guess_dead_reckoning(ms);
  const StateLayout layout{3, 6};
  CHECK(x.segment<3>(layout.source_offset(1)).cwiseAbs().maxCoeff() == 0.0);
  Vec3d cumsum = Vec3d::Zero();
  for (int k = 1; k < 6; ++k) {
    cumsum += ms.s_delta[k - 1];
    CHECK((x.segment<3>(layout.source_offset(k + 1)) - cumsum)
              .cwiseAbs()
              .maxCoeff() < 1e-15);
  }
  // Array blocks are zero.
  CHECK(x.head(16).cwiseAbs().maxCoeff() == 0.0);

  Perturbation none;
  none.position = none.angle = none.tau = none.delta = 0.0;
  CHECK((initial_guess_perturbed(sc, none, 3) - pack_state(sc))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  const VecXd p1 = initial_guess_perturbed(sc, Perturbation{}, 3);
  const VecXd p2 = initial_guess_perturbed(sc, Perturbation{}, 3);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  const VecXd truth = pack_state(sc);
  CHECK((p1 - truth).cwiseAbs().maxCoeff() <= 0.2);
  CHECK((p1 - truth).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("residual rejects states with coincident source and array") {
  const Scenario sc = testsupport::random_scenario(3, 5, 71);
  const CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  VecXd x = pack_state(sc);
  x.segment<3>(prob.layout().source_offset(2)) =
      x.segment<3>(prob.layout().array_offset(1));  // source 2 onto array 2
  CHECK_THROWS_AS(residual(x, prob), DegenerateGeometry);
}

TEST_CASE("problem validation catches dimension mismatches") {
  const Scenario sc = testsupport::random_scenario(3, 5, 69);
  CalibrationProblem prob =
      make_problem(sc, NoiseModel::zero(3), NoiseModel::diagonal(3));
  prob.initial_guess = VecXd::Zero(7);
  CHECK_THROWS_AS(solve(prob), InvalidConfig);
}

}  // TEST_SUITE
