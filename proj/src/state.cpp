#include "arraycal/state.hpp"

namespace arraycal {

VecXd pack_state(const Scenario& sc) {
  const StateLayout layout{sc.num_arrays(), sc.num_steps()};
  VecXd x(layout.dim());
  for (int i = 1; i < sc.num_arrays(); ++i) {
    const int at = layout.array_offset(i);
    const ArrayExtrinsicsd& a = sc.arrays[i];
    x.segment<3>(at) = a.position;
    x[at + 3] = a.euler.theta_x;
    x[at + 4] = a.euler.theta_y;
    x[at + 5] = a.euler.theta_z;
    x[at + 6] = a.tau;
    x[at + 7] = a.delta;
  }
  for (int k = 1; k <= sc.num_steps(); ++k) {
    x.segment<3>(layout.source_offset(k)) = sc.trajectory[k - 1];
  }
  return x;
}

Scenario scenario_with_state(const Scenario& sc, const VecXd& x) {
  const StateLayout layout{sc.num_arrays(), sc.num_steps()};
  if (x.size() != layout.dim()) {
    throw InvalidConfig("state dimension does not match the scenario");
  }
  Scenario out = sc;
  for (int i = 1; i < sc.num_arrays(); ++i) {
    const int at = layout.array_offset(i);
    ArrayExtrinsicsd& a = out.arrays[i];
    a.position = x.segment<3>(at);
    a.euler.theta_x = x[at + 3];
    a.euler.theta_y = x[at + 4];
    a.euler.theta_z = x[at + 5];
    a.tau = x[at + 6];
    a.delta = x[at + 7];
  }
  for (int k = 1; k <= sc.num_steps(); ++k) {
    out.trajectory[k - 1] = x.segment<3>(layout.source_offset(k));
  }
  return out;
}

void renormalize_angles(VecXd& x, const StateLayout& layout) {
  for (int i = 1; i < layout.num_arrays; ++i) {
    const int at = layout.array_offset(i);
    for (int a = 3; a < 6; ++a) x[at + a] = wrap_angle(x[at + a]);
  }
}

}  // namespace arraycal
