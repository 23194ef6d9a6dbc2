#include "arraycal/jacobian.hpp"

#include <Eigen/Cholesky>

#include <string>

namespace arraycal {

namespace {

void check_step(const Scenario& sc, int step) {
  if (step < 1 || step > sc.num_steps()) {
    throw InvalidConfig("step index out of range");
  }
}

}  // namespace

MatXd block_L(const Scenario& sc, int step) {
  check_step(sc, step);
  const int n = sc.num_arrays();
  const Vec3d& s = sc.trajectory[step - 1];
  MatXd L = MatXd::Zero(4 * (n - 1), 8 * (n - 1));
  for (int i = 1; i < n; ++i) {
    try {
      L.block<4, 8>(4 * (i - 1), 8 * (i - 1)) =
          block_H(sc.arrays[i], s, step, sc.dt, sc.c);
    } catch (const DegenerateGeometry&) {
      throw DegenerateGeometry("step " + std::to_string(step) +
                               ": degenerate geometry at array " +
                               std::to_string(i));
    }
  }
  return L;
}

MatXd block_T(const Scenario& sc, int step) {
  check_step(sc, step);
  const int n = sc.num_arrays();
  const Vec3d& s = sc.trajectory[step - 1];
  double ref_dist;
  try {
    ref_dist = distance(s, sc.arrays[0].position);
  } catch (const DegenerateGeometry&) {
    throw DegenerateGeometry("step " + std::to_string(step) +
                             ": source coincides with reference array");
  }
  const RowVec3d ref_term = (s / (sc.c * ref_dist)).transpose();
  MatXd T(4 * (n - 1), 3);
  for (int i = 1; i < n; ++i) {
    try {
      T.block<1, 3>(4 * (i - 1), 0) =
          -block_h(sc.arrays[i].position, s, sc.c) - ref_term;
      T.block<3, 3>(4 * (i - 1) + 1, 0) = -block_U(sc.arrays[i], s);
    } catch (const DegenerateGeometry&) {
      throw DegenerateGeometry("step " + std::to_string(step) +
                               ": degenerate geometry at array " +
                               std::to_string(i));
    }
  }
  return T;
}

JacobianBundle assemble(const Scenario& sc) {
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  JacobianBundle bundle;
  bundle.layout = StateLayout{n, k_total};
  const int meas_rows = 4 * (n - 1);
  const int g1 = meas_rows * k_total + 3 * (k_total - 1);
  const int g2 = bundle.layout.dim();
  bundle.J = MatXd::Zero(g1, g2);
  bundle.L.reserve(k_total);
  bundle.T.reserve(k_total);

  int row = 0;
  for (int k = 1; k <= k_total; ++k) {
    bundle.L.push_back(block_L(sc, k));
    bundle.T.push_back(block_T(sc, k));
    bundle.J.block(row, 0, meas_rows, 8 * (n - 1)) = bundle.L.back();
    bundle.J.block(row, bundle.layout.source_offset(k), meas_rows, 3) =
        bundle.T.back();
    row += meas_rows;
    if (k < k_total) {
      // Relative-displacement rows: d(s^{k+1} - s^k)/ds.
      bundle.J.block<3, 3>(row, bundle.layout.source_offset(k)) =
          -Mat3d::Identity();
      bundle.J.block<3, 3>(row, bundle.layout.source_offset(k + 1)) =
          Mat3d::Identity();
      row += 3;
    }
  }
  return bundle;
}

VecXd observe(const Scenario& sc) {
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  const int meas_rows = 4 * (n - 1);
  VecXd g(meas_rows * k_total + 3 * (k_total - 1));
  Eigen::Index at = 0;
  for (int k = 1; k <= k_total; ++k) {
    g.segment(at, meas_rows) = ideal_measurement(sc, k);
    at += meas_rows;
    if (k < k_total) {
      g.segment<3>(at) = sc.trajectory[k] - sc.trajectory[k - 1];
      at += 3;
    }
  }
  return g;
}

MatXd fim(const JacobianBundle& bundle, const NoiseModel& nm) {
  nm.validate(bundle.layout.num_arrays);
  const Eigen::LLT<MatXd> llt_p(nm.P);
  const Eigen::LLT<Mat3d> llt_q(nm.Q);
  const int meas_rows = 4 * (bundle.layout.num_arrays - 1);
  const int k_total = bundle.layout.num_steps;

  // W^{-1} J blockwise, then J^T (W^{-1} J).
  MatXd winv_j(bundle.J.rows(), bundle.J.cols());
  int row = 0;
  for (int k = 1; k <= k_total; ++k) {
    winv_j.middleRows(row, meas_rows) =
        llt_p.solve(bundle.J.middleRows(row, meas_rows));
    row += meas_rows;
    if (k < k_total) {
      winv_j.middleRows<3>(row) = llt_q.solve(bundle.J.middleRows<3>(row));
      row += 3;
    }
  }
  MatXd info = bundle.J.transpose() * winv_j;
  // Symmetrize away the solve roundoff.
  return 0.5 * (info + info.transpose());
}

MatXd finite_difference_jacobian(const Scenario& sc, double h) {
  if (!(h > 0.0)) throw InvalidConfig("finite-difference step must be positive");
  const StateLayout layout{sc.num_arrays(), sc.num_steps()};
  const VecXd x0 = pack_state(sc);
  const int g2 = layout.dim();
  MatXd J(observe(sc).size(), g2);
  for (int j = 0; j < g2; ++j) {
    VecXd xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) =
        (observe(scenario_with_state(sc, xp)) - observe(scenario_with_state(sc, xm))) /
        (2.0 * h);
  }
  return J;
}

}  // namespace arraycal
