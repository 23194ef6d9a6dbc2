#include "arraycal/rank.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>

namespace arraycal {

namespace {

double cutoff(const VecXd& sv, Eigen::Index rows, Eigen::Index cols,
              const RankOptions& opts) {
  if (opts.threshold >= 0.0) return opts.threshold;
  if (sv.size() == 0) return 0.0;
  return sv(0) * static_cast<double>(std::max(rows, cols)) *
         std::numeric_limits<double>::epsilon();
}

}  // namespace

VecXd singular_values(const MatXd& m) {
  if (m.size() == 0) return VecXd();
  return Eigen::JacobiSVD<MatXd>(m).singularValues();
}

int numerical_rank(const MatXd& m, const RankOptions& opts) {
  if (m.size() == 0) return 0;
  const VecXd sv = singular_values(m);
  const double tol = cutoff(sv, m.rows(), m.cols(), opts);
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  return rank;
}

MatXd null_space_basis(const MatXd& m, const RankOptions& opts) {
  Eigen::JacobiSVD<MatXd> svd(m, Eigen::ComputeFullV);
  const VecXd sv = svd.singularValues();
  const double tol = cutoff(sv, m.rows(), m.cols(), opts);
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  // Singular values only exist for min(rows, cols); any extra columns beyond
  // that are null directions as well.
  return svd.matrixV().rightCols(m.cols() - rank);
}

}  // namespace arraycal
