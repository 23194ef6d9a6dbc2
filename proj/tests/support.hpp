#pragma once

// Shared scenario factories for the unit and acceptance suites.

#include <stdexcept>
#include <vector>

#include "arraycal/rng.hpp"
#include "arraycal/scenario.hpp"

namespace testsupport {

using namespace arraycal;

// Random non-degenerate scenario: random extrinsics plus a seeded random walk
// kept clear of every array. Deterministic per seed.
inline Scenario random_scenario(int num_arrays, int num_steps,
                                std::uint64_t seed, bool avoid_gimbal = false) {
  ExtrinsicsBounds bounds;
  if (avoid_gimbal) bounds.theta_y_margin = 0.2;
  Scenario sc;
  sc.seed = seed;
  sc.arrays = random_extrinsics(num_arrays, bounds, seed);
  SplitMix64 rng(derive_seed(seed, 77, 1));
  for (int attempt = 0; attempt < 500; ++attempt) {
    std::vector<Vec3d> traj;
    Vec3d s(rng.next_in(0.5, 1.5), rng.next_in(0.5, 1.5), rng.next_in(0.5, 1.5));
    bool ok = true;
    for (int step = 0; step < num_steps && ok; ++step) {
      if (step > 0) {
        Vec3d dir(rng.next_in(-1.0, 1.0), rng.next_in(-1.0, 1.0),
                  rng.next_in(-1.0, 1.0));
        const double n = dir.norm();
        s += (n > 1e-3) ? Vec3d(0.1 * dir / n) : Vec3d(0.1, 0.0, 0.0);
      }
      traj.push_back(s);
      for (const auto& a : sc.arrays) {
        if ((s - a.position).norm() < 0.2) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      sc.trajectory = traj;
      sc.validate();
      return sc;
    }
  }
  throw std::runtime_error("could not place a trajectory clear of the arrays");
}

}  // namespace testsupport
