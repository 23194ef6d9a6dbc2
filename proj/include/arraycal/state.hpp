#pragma once

#include "arraycal/scenario.hpp"
#include "arraycal/types.hpp"

namespace arraycal {

/// Layout of the joint state x = [x_arr_2; ...; x_arr_N; s^1; ...; s^K]:
/// each non-reference array contributes [position(3); euler(3); tau; delta],
/// then the K source positions. The reference array is gauge-fixed to zero
/// and carries no state entries.
struct StateLayout {
  int num_arrays = 0;  // N, including the reference
  int num_steps = 0;   // K

  int dim() const { return 8 * (num_arrays - 1) + 3 * num_steps; }

  /// Offset of array i's 8-entry block; i is the 0-based scenario index, >= 1.
  int array_offset(int i) const { return 8 * (i - 1); }

  /// Offset of source position s^k; k is 1-based.
  int source_offset(int k) const {
    return 8 * (num_arrays - 1) + 3 * (k - 1);
  }
};

/// Ground-truth state of a scenario in the layout above.
VecXd pack_state(const Scenario& sc);

/// Copy of `sc` with arrays 1..N-1 and the trajectory replaced from `x`.
/// Angles are taken verbatim (no wrapping) so pack/unpack round-trips.
Scenario scenario_with_state(const Scenario& sc, const VecXd& x);

/// Wraps the Euler-angle entries of a state into [0, 2*pi). The rotation
/// matrices are 2*pi-periodic, so the observation model is unchanged.
void renormalize_angles(VecXd& x, const StateLayout& layout);

}  // namespace arraycal
