#pragma once

#include <string>
#include <vector>

#include "arraycal/rank.hpp"
#include "arraycal/scenario.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

// Identifiability analysis of the joint calibration problem. Everything here
// reduces to column-rank questions about the information core F of the full
// Jacobian and its rank-preserving reductions Tbar / Lbar_i.

/// Reasons a scenario can fail (or be flagged as failing) observability.
enum class Clause {
  KBound,              // fewer rows than columns: K below the ceiling bound
  KLessThanFive,       // fewer than five emissions
  CollinearOrigin,     // source positions collinear with the reference origin
  PlanarMotion,        // source confined to x=a*y, x=b*z or y=c*z
  CollinearWithArray,  // source positions collinear with a non-reference array
  GimbalAngle,         // theta_y = pi/2 for some array
  TbarRankDeficient,   // rank(Tbar) < 3
  LbarRankDeficient,   // rank(Lbar_i) < 8 for some array
};

std::string clause_label(Clause c);

/// One detector / necessary-condition hit. array_index is the 0-based
/// scenario index when the clause is array-specific, else -1.
struct Finding {
  Clause clause;
  int array_index = -1;
  std::string detail;
};

/// Lower bound on K so the Jacobian has at least as many rows as columns:
/// ceil(2 + 3 / (4(N-1))).
int k_lower_bound(int num_arrays);

/// F = [L^1 T^1; ...; L^K T^K]: the measurement part of the Jacobian with all
/// per-step source columns folded into one 3-wide block. Full column rank of
/// F is equivalent to full column rank of the Jacobian itself.
/// Size 4(N-1)K x (8(N-1) + 3).
MatXd build_F(const Scenario& sc);

/// Tbar (4K x 3): what remains of the source-position columns after the
/// row/column elimination. Rows 1-2 and the trailing 3K rows are zero; row k
/// (3 <= k <= K) is -(k-2)*a1 + (k-1)*a2 - a_k with a_k = (s^k/(c d1^k))^T.
MatXd reduce_Tbar(const Scenario& sc);

/// Numerical rank of Tbar. The default cutoff is anchored to the matrix's
/// construction scale (row norms are at most 2K/c): an origin-collinear
/// trajectory makes Tbar an exact-arithmetic zero matrix, and the roundoff
/// residue must not read as rank under a purely relative threshold.
int tbar_rank(const Scenario& sc, const RankOptions& opts = {});

/// Lbar_i (4K x 8) for the array at 0-based scenario index >= 1: identity
/// corner from the clock columns, K-2 combination rows of the h blocks, and
/// the stacked [U^k V^k] DOA rows.
MatXd reduce_Lbar(const Scenario& sc, int array_index);

struct ReducedMatrices {
  MatXd F;
  MatXd Fbar_prime;          // diag(Lbar_2..Lbar_N) with Tbar repeated
  MatXd Tbar;                // 4K x 3
  std::vector<MatXd> Lbar;   // entry j is the array at scenario index j+1
};

/// Builds F and its reduced form from the closed-form Tbar / Lbar blocks.
/// rank(F) == rank(Fbar_prime) since the reduction chain is elementary.
ReducedMatrices build_reduced(const Scenario& sc);

/// M_{j_T} for the array at 0-based index j: [Lbar_j Tbar] stacked over
/// [-Lbar_j 0] repeated N-2 times; 4K(N-1) x 11.
MatXd build_MjT(const Scenario& sc, int array_index);

/// Failed necessary conditions (empty means all hold): the K bound, K >= 5,
/// rank(Tbar) = 3 and rank(Lbar_i) = 8 for every array.
std::vector<Finding> check_necessary(const Scenario& sc,
                                     const RankOptions& opts = {});

struct SufficiencyTrial {
  int array_index;      // candidate j, 0-based scenario index
  int rank_mjt;         // rank of M_{j_T} (full = 11)
  bool others_full;     // rank(Lbar_i) = 8 for every i != j
};

struct SufficiencyVerdict {
  bool sufficient = false;
  int witness_index = -1;  // first j that passed, 0-based; -1 if none
  std::vector<SufficiencyTrial> trials;
};

/// Sufficient condition: some j with rank(M_{j_T}) = 11 and all other Lbar_i
/// of full column rank. All candidate j are tried.
SufficiencyVerdict check_sufficient(const Scenario& sc,
                                    const RankOptions& opts = {});

struct DetectorOptions {
  double tol = 1e-9;        // relative: normalized cross products, plane fit
  double angle_tol = 1e-9;  // radians around pi/2
};

/// Purely geometric screening of the trajectory and extrinsics for the known
/// unidentifiable families. Collinearity through the origin suppresses the
/// planarity report (a line through the origin lies in such a plane by
/// construction).
std::vector<Finding> detect_degenerate(const Scenario& sc,
                                       const DetectorOptions& opts = {});

struct RankStep {
  int step;        // prefix length k
  int rank_F;      // rank of F restricted to steps 1..k
  int rank_J;      // = rank_F + 3(k-1)
  int g2;          // state dimension 8(N-1) + 3k
  int deficit;     // g2 - rank_J  (equals 8(N-1)+3 - rank_F)
  bool full_rank;
};

struct RankReport {
  std::vector<RankStep> trace;
  bool full_column_rank = false;
  int first_full_rank_step = -1;  // 1-based; -1 when never full
  int rank_Tbar = 0;
  std::vector<int> rank_Lbar;  // entry j is the array at scenario index j+1
  std::vector<Finding> violated_conditions;  // necessary-condition failures at K
};

/// Rank of the F prefix for every k = 1..K (one SVD per prefix, so quadratic
/// in K overall), the derived Jacobian rank/deficit, and the Tbar/Lbar ranks
/// at the final K.
RankReport rank_trace(const Scenario& sc, const RankOptions& opts = {});

}  // namespace arraycal
