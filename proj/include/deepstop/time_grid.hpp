#pragma once

#include "deepstop/errors.hpp"

namespace deepstop {

/// Equidistant exercise grid with an optional finer Brownian subgrid.
/// All node times are computed from the fine index (k*J + j)*dt_fine so that
/// fine_time(k, J) == fine_time(k+1, 0) holds exactly in floating point.
struct TimeGrid {
  double horizon = 1.0;  // T in years
  int steps = 1;         // N coarse intervals
  int substeps = 1;      // J fine intervals per coarse interval

  TimeGrid() = default;
  TimeGrid(double t, int n, int j) : horizon(t), steps(n), substeps(j) {
    if (t <= 0.0) throw Error(ErrorCode::ValidationError, "grid horizon must be positive");
    if (n < 1) throw Error(ErrorCode::ValidationError, "grid needs at least one step");
    if (j < 1) throw Error(ErrorCode::ValidationError, "grid needs at least one substep");
  }

  double dt() const { return horizon / steps; }
  double fine_dt() const { return horizon / (static_cast<double>(steps) * substeps); }

  double fine_time(int k, int j) const {
    return (static_cast<double>(k) * substeps + j) * fine_dt();
  }
  double time(int k) const { return fine_time(k, 0); }

  bool operator==(const TimeGrid& o) const {
    return horizon == o.horizon && steps == o.steps && substeps == o.substeps;
  }
};

}  // namespace deepstop
