#include "arraycal/observability.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "arraycal/jacobian.hpp"

namespace arraycal {

std::string clause_label(Clause c) {
  switch (c) {
    case Clause::KBound: return "K-bound";
    case Clause::KLessThanFive: return "too-few-steps";
    case Clause::CollinearOrigin: return "collinear-with-origin";
    case Clause::PlanarMotion: return "planar-motion";
    case Clause::CollinearWithArray: return "collinear-with-array";
    case Clause::GimbalAngle: return "gimbal-angle";
    case Clause::TbarRankDeficient: return "Tbar-rank";
    case Clause::LbarRankDeficient: return "Lbar-rank";
  }
  return "unknown";
}

int k_lower_bound(int num_arrays) {
  if (num_arrays < 2) throw InvalidConfig("need at least two arrays");
  return static_cast<int>(
      std::ceil(2.0 + 3.0 / (4.0 * (num_arrays - 1))));
}

MatXd build_F(const Scenario& sc) {
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  const int meas_rows = 4 * (n - 1);
  MatXd f = MatXd::Zero(meas_rows * k_total, 8 * (n - 1) + 3);
  for (int k = 1; k <= k_total; ++k) {
    f.block((k - 1) * meas_rows, 0, meas_rows, 8 * (n - 1)) = block_L(sc, k);
    f.block((k - 1) * meas_rows, 8 * (n - 1), meas_rows, 3) = block_T(sc, k);
  }
  return f;
}

namespace {

// (s^k / (c * d_1^k))^T for every step.
std::vector<RowVec3d> ref_direction_rows(const Scenario& sc) {
  std::vector<RowVec3d> rows;
  rows.reserve(sc.num_steps());
  for (int k = 1; k <= sc.num_steps(); ++k) {
    const Vec3d& s = sc.trajectory[k - 1];
    const double d1 = distance(s, sc.arrays[0].position);
    rows.push_back((s / (sc.c * d1)).transpose());
  }
  return rows;
}

void check_array_index(const Scenario& sc, int array_index) {
  if (array_index < 1 || array_index >= sc.num_arrays()) {
    throw InvalidConfig("array index must address a non-reference array");
  }
}

}  // namespace

MatXd reduce_Tbar(const Scenario& sc) {
  const int k_total = sc.num_steps();
  const std::vector<RowVec3d> a = ref_direction_rows(sc);
  MatXd tbar = MatXd::Zero(4 * k_total, 3);
  for (int k = 3; k <= k_total; ++k) {
    tbar.row(k - 1) =
        -double(k - 2) * a[0] + double(k - 1) * a[1] - a[k - 1];
  }
  return tbar;
}

int tbar_rank(const Scenario& sc, const RankOptions& opts) {
  const MatXd tbar = reduce_Tbar(sc);
  if (opts.threshold >= 0.0) return numerical_rank(tbar, opts);
  const VecXd sv = singular_values(tbar);
  if (sv.size() == 0) return 0;
  const double scale = std::max(sv(0), 2.0 * sc.num_steps() / sc.c);
  const double tol = scale *
                     static_cast<double>(std::max(tbar.rows(), tbar.cols())) *
                     std::numeric_limits<double>::epsilon();
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  return rank;
}

MatXd reduce_Lbar(const Scenario& sc, int array_index) {
  check_array_index(sc, array_index);
  const int k_total = sc.num_steps();
  const ArrayExtrinsicsd& arr = sc.arrays[array_index];
  MatXd lbar = MatXd::Zero(4 * k_total, 8);
  lbar(0, 0) = 1.0;
  if (k_total >= 2) lbar(1, 1) = 1.0;
  std::vector<RowVec3d> h;
  h.reserve(k_total);
  for (int k = 1; k <= k_total; ++k) {
    h.push_back(block_h(arr.position, sc.trajectory[k - 1], sc.c));
  }
  for (int k = 3; k <= k_total; ++k) {
    lbar.block<1, 3>(k - 1, 2) =
        double(k - 2) * h[0] - double(k - 1) * h[1] + h[k - 1];
  }
  for (int k = 1; k <= k_total; ++k) {
    lbar.block<3, 3>(k_total + 3 * (k - 1), 2) =
        block_U(arr, sc.trajectory[k - 1]);
    lbar.block<3, 3>(k_total + 3 * (k - 1), 5) =
        block_V(arr, sc.trajectory[k - 1]);
  }
  return lbar;
}

ReducedMatrices build_reduced(const Scenario& sc) {
  if (!(sc.dt > 0.0)) {
    throw InvalidConfig("dt must be positive (the reduction divides by dt)");
  }
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  ReducedMatrices rm;
  rm.F = build_F(sc);
  rm.Tbar = reduce_Tbar(sc);
  rm.Lbar.reserve(n - 1);
  for (int i = 1; i < n; ++i) rm.Lbar.push_back(reduce_Lbar(sc, i));
  rm.Fbar_prime = MatXd::Zero(4 * k_total * (n - 1), 8 * (n - 1) + 3);
  for (int i = 0; i < n - 1; ++i) {
    rm.Fbar_prime.block(4 * k_total * i, 8 * i, 4 * k_total, 8) = rm.Lbar[i];
    rm.Fbar_prime.block(4 * k_total * i, 8 * (n - 1), 4 * k_total, 3) = rm.Tbar;
  }
  return rm;
}

MatXd build_MjT(const Scenario& sc, int array_index) {
  check_array_index(sc, array_index);
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  const MatXd lbar = reduce_Lbar(sc, array_index);
  const MatXd tbar = reduce_Tbar(sc);
  MatXd m = MatXd::Zero(4 * k_total * (n - 1), 11);
  m.block(0, 0, 4 * k_total, 8) = lbar;
  m.block(0, 8, 4 * k_total, 3) = tbar;
  for (int b = 1; b < n - 1; ++b) {
    m.block(4 * k_total * b, 0, 4 * k_total, 8) = -lbar;
  }
  return m;
}

std::vector<Finding> check_necessary(const Scenario& sc,
                                     const RankOptions& opts) {
  std::vector<Finding> failures;
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  const int bound = k_lower_bound(n);
  if (k_total < bound) {
    failures.push_back({Clause::KBound, -1,
                        "K = " + std::to_string(k_total) + " below the row bound " +
                            std::to_string(bound)});
  }
  if (k_total < 5) {
    failures.push_back({Clause::KLessThanFive, -1,
                        "K = " + std::to_string(k_total) + " < 5"});
  }
  const int rank_tbar = tbar_rank(sc, opts);
  if (rank_tbar < 3) {
    failures.push_back({Clause::TbarRankDeficient, -1,
                        "rank(Tbar) = " + std::to_string(rank_tbar)});
  }
  for (int i = 1; i < n; ++i) {
    const int r = numerical_rank(reduce_Lbar(sc, i), opts);
    if (r < 8) {
      failures.push_back({Clause::LbarRankDeficient, i,
                          "rank(Lbar) = " + std::to_string(r) + " for array " +
                              std::to_string(i + 1)});
    }
  }
  return failures;
}

SufficiencyVerdict check_sufficient(const Scenario& sc,
                                    const RankOptions& opts) {
  const int n = sc.num_arrays();
  std::vector<int> lbar_rank(n, 0);
  for (int i = 1; i < n; ++i) {
    lbar_rank[i] = numerical_rank(reduce_Lbar(sc, i), opts);
  }
  SufficiencyVerdict verdict;
  for (int j = 1; j < n; ++j) {
    SufficiencyTrial trial;
    trial.array_index = j;
    trial.rank_mjt = numerical_rank(build_MjT(sc, j), opts);
    trial.others_full = true;
    for (int i = 1; i < n; ++i) {
      if (i != j && lbar_rank[i] < 8) trial.others_full = false;
    }
    verdict.trials.push_back(trial);
    if (!verdict.sufficient && trial.rank_mjt == 11 && trial.others_full) {
      verdict.sufficient = true;
      verdict.witness_index = j;
    }
  }
  return verdict;
}

namespace {

bool mutually_collinear(const std::vector<Vec3d>& points, const Vec3d& origin,
                        double tol) {
  // All (s^k - origin) parallel to the first one, up to sign.
  Vec3d first = points[0] - origin;
  const double n0 = first.norm();
  if (n0 <= kCoincidenceEps) return false;
  first /= n0;
  for (const auto& p : points) {
    Vec3d v = p - origin;
    const double nv = v.norm();
    if (nv <= kCoincidenceEps) return false;
    if ((first.cross(v / nv)).norm() > tol) return false;
  }
  return true;
}

// Least-squares fit of lhs = coeff * rhs over the trajectory; returns true
// (and the coefficient) when the residual is below tol relative to the
// trajectory scale.
bool fits_plane(const std::vector<double>& lhs, const std::vector<double>& rhs,
                double scale, double tol, double* coeff) {
  double srr = 0.0, slr = 0.0;
  for (size_t k = 0; k < lhs.size(); ++k) {
    srr += rhs[k] * rhs[k];
    slr += lhs[k] * rhs[k];
  }
  double alpha = 0.0;
  if (srr > scale * scale * tol * tol) alpha = slr / srr;
  double max_resid = 0.0;
  for (size_t k = 0; k < lhs.size(); ++k) {
    max_resid = std::max(max_resid, std::abs(lhs[k] - alpha * rhs[k]));
  }
  if (max_resid > tol * scale) return false;
  *coeff = alpha;
  return true;
}

}  // namespace

std::vector<Finding> detect_degenerate(const Scenario& sc,
                                       const DetectorOptions& opts) {
  std::vector<Finding> findings;
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();

  if (k_total < 5) {
    findings.push_back({Clause::KLessThanFive, -1,
                        "K = " + std::to_string(k_total) + " < 5"});
  }

  const bool origin_collinear =
      mutually_collinear(sc.trajectory, Vec3d::Zero(), opts.tol);
  if (origin_collinear) {
    findings.push_back({Clause::CollinearOrigin, -1,
                        "source positions collinear with the reference origin"});
  } else {
    // A line through the origin lies in one of these planes anyway, so the
    // planarity report would be redundant there.
    double scale = 0.0;
    std::vector<double> xs, ys, zs;
    xs.reserve(k_total);
    ys.reserve(k_total);
    zs.reserve(k_total);
    for (const auto& s : sc.trajectory) {
      xs.push_back(s.x());
      ys.push_back(s.y());
      zs.push_back(s.z());
      scale = std::max(scale, s.norm());
    }
    double coeff = 0.0;
    double max_z = 0.0;
    for (double z : zs) max_z = std::max(max_z, std::abs(z));
    if (fits_plane(xs, ys, scale, opts.tol, &coeff)) {
      findings.push_back({Clause::PlanarMotion, -1,
                          "x = " + std::to_string(coeff) + " * y"});
    } else if (fits_plane(xs, zs, scale, opts.tol, &coeff)) {
      findings.push_back({Clause::PlanarMotion, -1,
                          "x = " + std::to_string(coeff) + " * z"});
    } else if (fits_plane(ys, zs, scale, opts.tol, &coeff)) {
      findings.push_back({Clause::PlanarMotion, -1,
                          "y = " + std::to_string(coeff) + " * z"});
    } else if (max_z <= opts.tol * scale) {
      // z = 0 is the one coordinate plane the three two-coordinate families
      // cannot express with a finite coefficient.
      findings.push_back({Clause::PlanarMotion, -1, "z = 0"});
    }
  }

  for (int i = 1; i < n; ++i) {
    if (mutually_collinear(sc.trajectory, sc.arrays[i].position, opts.tol)) {
      findings.push_back({Clause::CollinearWithArray, i,
                          "source positions collinear with array " +
                              std::to_string(i + 1)});
    }
    if (std::abs(sc.arrays[i].euler.theta_y - EIGEN_PI / 2) <= opts.angle_tol) {
      findings.push_back({Clause::GimbalAngle, i,
                          "theta_y = pi/2 for array " + std::to_string(i + 1)});
    }
  }
  return findings;
}

RankReport rank_trace(const Scenario& sc, const RankOptions& opts) {
  const int n = sc.num_arrays();
  const int k_total = sc.num_steps();
  const int meas_rows = 4 * (n - 1);
  const int full_cols = 8 * (n - 1) + 3;
  const MatXd f = build_F(sc);

  RankReport report;
  report.trace.reserve(k_total);
  for (int k = 1; k <= k_total; ++k) {
    RankStep step;
    step.step = k;
    step.rank_F = numerical_rank(f.topRows(meas_rows * k), opts);
    step.rank_J = step.rank_F + 3 * (k - 1);
    step.g2 = 8 * (n - 1) + 3 * k;
    step.deficit = full_cols - step.rank_F;
    step.full_rank = (step.deficit == 0);
    if (step.full_rank && report.first_full_rank_step < 0) {
      report.first_full_rank_step = k;
    }
    report.trace.push_back(step);
  }
  report.full_column_rank = !report.trace.empty() && report.trace.back().full_rank;
  report.rank_Tbar = tbar_rank(sc, opts);
  for (int i = 1; i < n; ++i) {
    report.rank_Lbar.push_back(numerical_rank(reduce_Lbar(sc, i), opts));
  }
  report.violated_conditions = check_necessary(sc, opts);
  return report;
}

}  // namespace arraycal
