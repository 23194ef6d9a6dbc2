#include <doctest.h>

#include <cmath>

#include "arraycal/jacobian.hpp"
#include "arraycal/rank.hpp"
#include "arraycal/rng.hpp"
#include "support.hpp"

using namespace arraycal;

namespace {

const double kPi = EIGEN_PI;

ArrayExtrinsicsd random_array(SplitMix64& rng) {
  ArrayExtrinsicsd arr;
  arr.position = Vec3d(rng.next_in(-3, 3), rng.next_in(-3, 3), rng.next_in(-3, 3));
  arr.euler = EulerAnglesd::normalized(rng.next_in(0, 2 * kPi),
                                       rng.next_in(0, kPi),
                                       rng.next_in(0, 2 * kPi));
  arr.tau = rng.next_in(0, 0.1);
  arr.delta = rng.next_in(0, 1e-4);
  return arr;
}

Vec3d random_source_near(SplitMix64& rng, const Vec3d& avoid) {
  for (;;) {
    const Vec3d s(rng.next_in(-4, 4), rng.next_in(-4, 4), rng.next_in(-4, 4));
    if ((s - avoid).norm() > 0.5 && s.norm() > 0.5) return s;
  }
}

}  // namespace

TEST_SUITE("jacobian") {

TEST_CASE("block_h: unit geometry, norm, and finite differences") {
  ArrayExtrinsicsd arr;
  const RowVec3d h = block_h(arr.position, Vec3d(1, 0, 0), 1.0);
  CHECK((h - RowVec3d(-1, 0, 0)).cwiseAbs().maxCoeff() < 1e-15);

  SplitMix64 rng(5);
  const double c = 343.0;
  for (int i = 0; i < 100; ++i) {
    ArrayExtrinsicsd a = random_array(rng);
    const Vec3d s = random_source_near(rng, a.position);
    const RowVec3d row = block_h(a.position, s, c);
    CHECK(row.norm() == doctest::Approx(1.0 / c).epsilon(1e-12));

    // Central finite difference of tdoa with respect to the array position.
    const double ref_dist = distance(s, Vec3d::Zero());
    const double h_step = 1e-6;
    for (int j = 0; j < 3; ++j) {
      ArrayExtrinsicsd ap = a, am = a;
      ap.position[j] += h_step;
      am.position[j] -= h_step;
      const double fd = (tdoa(ap, ref_dist, s, 2, 1.0, c) -
                         tdoa(am, ref_dist, s, 2, 1.0, c)) /
                        (2 * h_step);
      CHECK(std::abs(row[j] - fd) < 1e-6);
    }
  }
  CHECK_THROWS_AS(block_h(Vec3d(1, 1, 1), Vec3d(1, 1, 1), 343.0),
                  DegenerateGeometry);
}

TEST_CASE("block_U: rank 2, null direction, finite differences") {
  SplitMix64 rng(7);
  for (int i = 0; i < 100; ++i) {
    ArrayExtrinsicsd a = random_array(rng);
    const Vec3d s = random_source_near(rng, a.position);
    const Mat3d u = block_U(a, s);
    CHECK(numerical_rank(u) == 2);

    // The offset direction spans the null space of the projection factor.
    const Mat3d proj = doa_projection(a.position, s);
    CHECK((proj * (s - a.position)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(numerical_rank(MatXd(proj)) == 2);

    const double h_step = 1e-6;
    for (int j = 0; j < 3; ++j) {
      ArrayExtrinsicsd ap = a, am = a;
      ap.position[j] += h_step;
      am.position[j] -= h_step;
      const Vec3d fd = (doa(ap, s) - doa(am, s)) / (2 * h_step);
      CHECK((u.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("block_V: finite differences and structure at the gimbal angle") {
  SplitMix64 rng(11);
  for (int i = 0; i < 100; ++i) {
    ArrayExtrinsicsd a = random_array(rng);
    const Vec3d s = random_source_near(rng, a.position);
    const Mat3d v = block_V(a, s);
    const double h_step = 1e-6;
    double* angles[3] = {nullptr, nullptr, nullptr};
    for (int j = 0; j < 3; ++j) {
      ArrayExtrinsicsd ap = a, am = a;
      double* pa = j == 0 ? &ap.euler.theta_x : j == 1 ? &ap.euler.theta_y : &ap.euler.theta_z;
      double* ma = j == 0 ? &am.euler.theta_x : j == 1 ? &am.euler.theta_y : &am.euler.theta_z;
      *pa += h_step;
      *ma -= h_step;
      const Vec3d fd = (doa(ap, s) - doa(am, s)) / (2 * h_step);
      CHECK((v.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
    (void)angles;
  }

  // theta_y = pi/2: first row (0, *, 0), third column = -first column, rank 2.
  for (int i = 0; i < 100; ++i) {
    ArrayExtrinsicsd a = random_array(rng);
    a.euler.theta_y = kPi / 2;
    const Vec3d s = random_source_near(rng, a.position);
    const Mat3d v = block_V(a, s);
    CHECK(std::abs(v(0, 0)) < 1e-14);
    CHECK(std::abs(v(0, 2)) < 1e-14);
    CHECK((v.col(2) + v.col(0)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(numerical_rank(MatXd(v)) == 2);
  }

  // Zero angles with the offset on the x axis: rotating about x does nothing.
  ArrayExtrinsicsd a;
  const Mat3d v = block_V(a, Vec3d(1, 0, 0));
  CHECK(v.col(0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("block_H: clock entries, zero pattern, finite differences") {
  SplitMix64 rng(13);
  const double c = 343.0;
  const double dt = 0.5;
  for (int i = 0; i < 50; ++i) {
    ArrayExtrinsicsd a = random_array(rng);
    const Vec3d s = random_source_near(rng, a.position);
    const int k = 1 + int(rng.next() % 12);
    const Mat48d H = block_H(a, s, k, dt, c);
    CHECK(H(0, 6) == 1.0);
    CHECK(H(0, 7) == doctest::Approx(k * dt).epsilon(1e-15));
    CHECK(H.block<3, 2>(1, 6).cwiseAbs().maxCoeff() == 0.0);
    CHECK(H.block<1, 3>(0, 3).cwiseAbs().maxCoeff() == 0.0);

    // Full 4x8 block against central differences of [TDOA; DOA] w.r.t. the
    // array's own parameters.
    const double ref_dist = distance(s, Vec3d::Zero());
    const double h_step = 1e-6;
    auto measure = [&](const ArrayExtrinsicsd& arr) {
      Eigen::Vector4d m;
      m[0] = tdoa(arr, ref_dist, s, k, dt, c);
      m.tail<3>() = doa(arr, s);
      return m;
    };
    for (int j = 0; j < 8; ++j) {
      ArrayExtrinsicsd ap = a, am = a;
      auto bump = [&](ArrayExtrinsicsd& arr, double eps) {
        if (j < 3) arr.position[j] += eps;
        else if (j == 3) arr.euler.theta_x += eps;
        else if (j == 4) arr.euler.theta_y += eps;
        else if (j == 5) arr.euler.theta_z += eps;
        else if (j == 6) arr.tau += eps;
        else arr.delta += eps;
      };
      bump(ap, h_step);
      bump(am, -h_step);
      const Eigen::Vector4d fd = (measure(ap) - measure(am)) / (2 * h_step);
      CHECK((H.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("block_T: dimensions and finite differences") {
  const Scenario sc2 = testsupport::random_scenario(2, 5, 17);
  CHECK(block_T(sc2, 1).rows() == 4);
  CHECK(block_T(sc2, 1).cols() == 3);

  const Scenario sc = testsupport::random_scenario(4, 6, 19);
  const double h_step = 1e-6;
  for (int k = 1; k <= sc.num_steps(); ++k) {
    const MatXd t = block_T(sc, k);
    for (int j = 0; j < 3; ++j) {
      Scenario sp = sc, sm = sc;
      sp.trajectory[k - 1][j] += h_step;
      sm.trajectory[k - 1][j] -= h_step;
      const VecXd fd =
          (ideal_measurement(sp, k) - ideal_measurement(sm, k)) / (2 * h_step);
      CHECK((t.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  // Mirror geometry: array at -s makes the TDOA row vanish.
  Scenario mirror = sc2;
  const Vec3d s = mirror.trajectory[0];
  mirror.arrays[1].position = -s;
  const MatXd t = block_T(mirror, 1);
  for (int j = 0; j < 3; ++j) {
    Scenario sp = mirror, sm = mirror;
    sp.trajectory[0][j] += h_step;
    sm.trajectory[0][j] -= h_step;
    const double fd =
        (ideal_measurement(sp, 1)[0] - ideal_measurement(sm, 1)[0]) / (2 * h_step);
    CHECK(std::abs(t(0, j) - fd) < 1e-6);
  }
  CHECK(t.row(0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("assemble: dimensions and sparsity pattern") {
  const Scenario sc = testsupport::random_scenario(8, 10, 23);
  const JacobianBundle bundle = assemble(sc);
  CHECK(bundle.J.rows() == 307);  // 4*7*10 + 3*9
  CHECK(bundle.J.cols() == 86);   // 8*7 + 3*10

  // Zero blocks of the documented pattern are exactly zero.
  const int meas_rows = 4 * 7;
  int row = 0;
  for (int k = 1; k <= 10; ++k) {
    for (int kk = 1; kk <= 10; ++kk) {
      if (kk == k) continue;
      CHECK(bundle.J.block(row, bundle.layout.source_offset(kk), meas_rows, 3)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
    // L^k itself is block diagonal across arrays.
    for (int i = 1; i < 8; ++i) {
      for (int i2 = 1; i2 < 8; ++i2) {
        if (i2 == i) continue;
        CHECK(bundle.J.block(row + 4 * (i - 1), 8 * (i2 - 1), 4, 8)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
      }
    }
    row += meas_rows;
    if (k < 10) {
      CHECK(bundle.J.block(row, 0, 3, 8 * 7).cwiseAbs().maxCoeff() == 0.0);
      CHECK((bundle.J.block<3, 3>(row, bundle.layout.source_offset(k)) +
             Mat3d::Identity())
                .cwiseAbs()
                .maxCoeff() == 0.0);
      CHECK((bundle.J.block<3, 3>(row, bundle.layout.source_offset(k + 1)) -
             Mat3d::Identity())
                .cwiseAbs()
                .maxCoeff() == 0.0);
      row += 3;
    }
  }
}

TEST_CASE("assemble matches finite differences on random scenarios") {
  int id = 0;
  for (int n : {2, 3, 5}) {
    for (int k : {5, 9}) {
      const Scenario sc = testsupport::random_scenario(n, k, 100 + id++);
      const JacobianBundle bundle = assemble(sc);
      const MatXd fd = finite_difference_jacobian(sc, 1e-6);
      CHECK((bundle.J - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("finite differences: step-size bound and odometry exactness") {
  const Scenario sc = testsupport::random_scenario(3, 6, 31);
  const JacobianBundle bundle = assemble(sc);
  for (double h : {1e-4, 1e-5, 1e-6}) {
    const MatXd fd = finite_difference_jacobian(sc, h);
    CHECK((bundle.J - fd).cwiseAbs().maxCoeff() <
          std::max(1e-6, 10.0 * h * h));
  }

  // Odometry rows are linear, so central differences are exact there.
  const MatXd fd = finite_difference_jacobian(sc, 1e-3);
  const int meas_rows = 4 * 2;
  int row = meas_rows;
  for (int k = 1; k < 6; ++k) {
    CHECK((fd.middleRows<3>(row) - bundle.J.middleRows<3>(row))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    row += meas_rows + 3;
  }
}

TEST_CASE("finite differences localize a corrupted analytic block") {
  const Scenario sc = testsupport::random_scenario(3, 6, 37);
  JacobianBundle bundle = assemble(sc);
  const MatXd fd = finite_difference_jacobian(sc, 1e-6);

  // Corrupt the H block of array 2 (index 1) at step 3.
  const int meas_rows = 4 * 2;
  const int row0 = (meas_rows + 3) * 2;  // start of step-3 measurement rows
  bundle.J.block<4, 8>(row0, 0).array() += 1e-3;

  const MatXd diff = (bundle.J - fd).cwiseAbs();
  for (int r = 0; r < diff.rows(); ++r) {
    const bool corrupted = (r >= row0 && r < row0 + 4);
    if (corrupted) {
      CHECK(diff.row(r).maxCoeff() > 1e-4);
    } else {
      CHECK(diff.row(r).maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("fim: identity weighting, symmetry, rank equality") {
  const Scenario sc = testsupport::random_scenario(3, 7, 41);
  const JacobianBundle bundle = assemble(sc);

  NoiseModel identity;
  identity.P = MatXd::Identity(8, 8);
  identity.Q = Mat3d::Identity();
  const MatXd info = fim(bundle, identity);
  CHECK((info - bundle.J.transpose() * bundle.J).cwiseAbs().maxCoeff() < 1e-10);

  const NoiseModel nm = NoiseModel::diagonal(3);
  const MatXd weighted = fim(bundle, nm);
  CHECK((weighted - weighted.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(numerical_rank(weighted) == numerical_rank(bundle.J));

  // Random modestly scaled PD weightings keep the rank equality.
  SplitMix64 rng(59);
  for (int trial = 0; trial < 5; ++trial) {
    MatXd a(8, 8);
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) a(r, c) = rng.next_in(-1.0, 1.0);
    }
    NoiseModel random_w;
    random_w.P = a * a.transpose() + 0.5 * MatXd::Identity(8, 8);
    Mat3d b;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) b(r, c) = rng.next_in(-1.0, 1.0);
    }
    random_w.Q = b * b.transpose() + 0.5 * Mat3d::Identity();
    CHECK(numerical_rank(fim(bundle, random_w)) == numerical_rank(bundle.J));
  }

  NoiseModel bad = nm;
  bad.P(0, 0) = -1;
  CHECK_THROWS_AS(fim(bundle, bad), InvalidConfig);
}

TEST_CASE("degenerate geometry surfaces with the offending step") {
  Scenario sc = testsupport::random_scenario(3, 5, 45);
  sc.trajectory[2] = sc.arrays[1].position;  // source on top of array 2
  CHECK_THROWS_WITH_AS(assemble(sc), doctest::Contains("step 3"),
                       DegenerateGeometry);
  CHECK_THROWS_AS(ideal_measurement(sc, 3), DegenerateGeometry);
}

TEST_CASE("assembly and rank machinery handle K=1 and K=2") {
  for (int k : {1, 2}) {
    const Scenario sc = testsupport::random_scenario(3, k, 47 + k);
    const JacobianBundle bundle = assemble(sc);
    CHECK(bundle.J.rows() == 8 * k + 3 * (k - 1));
    CHECK(bundle.J.cols() == 16 + 3 * k);
    const MatXd fd = finite_difference_jacobian(sc, 1e-6);
    CHECK((bundle.J - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("null-space dimension is invariant under row permutations") {
  const Scenario sc = testsupport::random_scenario(3, 5, 43);
  const JacobianBundle bundle = assemble(sc);
  const int deficit = int(bundle.J.cols()) - numerical_rank(bundle.J);
  SplitMix64 rng(91);
  MatXd permuted = bundle.J;
  for (int r = int(permuted.rows()) - 1; r > 0; --r) {
    const int other = int(rng.next() % (r + 1));
    permuted.row(r).swap(permuted.row(other));
  }
  CHECK(int(permuted.cols()) - numerical_rank(permuted) == deficit);
}

}  // TEST_SUITE
