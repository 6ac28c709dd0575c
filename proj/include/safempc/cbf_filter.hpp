#pragma once

#include "safempc/model.hpp"
#include "safempc/obstacles.hpp"

namespace safempc {

struct CBFSpec {
  /// Per-step decay rate: the filter enforces
  /// h_i(F(x,u)) >= (1 - alpha_gain) h_i(x) for every obstacle.
  double alpha_gain = 0.2;
};

struct FilterResult {
  Control u;
  /// False when no control in the box satisfies every decay constraint;
  /// u is then the least-violating control instead.
  bool feasible = true;
};

/// Minimally modifies a nominal control to satisfy the one-step barrier
/// decay conditions: argmin ||u - u_nom||^2 subject to the per-obstacle
/// constraints (linearized in u; the quadratic remainder dt^2 ||u||^2 is
/// nonnegative, so the linear form is sufficient) and the control box.
/// Single-integrator models only: position constraints have relative
/// degree two under the double integrator and a one-step condition on u
/// does not exist there.
FilterResult cbf_filter(const CBFSpec& spec, const ModelSpec& model,
                        const ObstacleField& field, const State& x,
                        const Control& u_nom);

}  // namespace safempc
