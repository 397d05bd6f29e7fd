#pragma once

#include <vector>

#include "deepstop/linalg.hpp"
#include "deepstop/payoff.hpp"
#include "deepstop/simulate.hpp"
#include "deepstop/time_grid.hpp"

namespace deepstop {

/// Per-path stopping decisions produced by the backward sweep. `cached_sum`
/// holds the frozen martingale increments between the step being trained and
/// each path's stopping index; the full increment matrix is materialized only
/// when `track_increments` is on (tests and small studies).
struct StoppingState {
  int steps = 0;  // N
  std::vector<int> tau;
  std::vector<double> reward_at_tau;
  std::vector<double> cached_sum;
  bool track_increments = false;
  Matrix increments;  // paths x N, increments(i, j) = frozen dM_j for path i

  static StoppingState terminal(const PathEnsemble& paths, const PayoffSpec& payoff,
                                const TimeGrid& grid, bool track = false) {
    StoppingState s;
    s.steps = grid.steps;
    s.tau.assign(paths.count, grid.steps);
    s.reward_at_tau.resize(paths.count);
    s.cached_sum.assign(paths.count, 0.0);
    s.track_increments = track;
    if (track) s.increments.resize(paths.count, grid.steps);
    const double t_end = grid.time(grid.steps);
    for (std::size_t i = 0; i < paths.count; ++i)
      s.reward_at_tau[i] = reward(payoff, t_end, paths.state(grid.steps, i));
    return s;
  }
};

}  // namespace deepstop
