#pragma once

#include "arraycal/types.hpp"

namespace arraycal {

/// Numerical-rank policy. threshold < 0 selects the scale-aware default
/// sigma_max * max(rows, cols) * machine_epsilon; a nonnegative value is used
/// as an absolute singular-value cutoff.
struct RankOptions {
  double threshold = -1.0;
};

/// Singular values of M, descending.
VecXd singular_values(const MatXd& m);

/// Number of singular values above the cutoff.
int numerical_rank(const MatXd& m, const RankOptions& opts = {});

/// Orthonormal basis of the numerical null space (right singular vectors for
/// singular values at or below the cutoff); 0 columns when full column rank.
MatXd null_space_basis(const MatXd& m, const RankOptions& opts = {});

}  // namespace arraycal
