#pragma once

#include <functional>

#include "safempc/rng.hpp"
#include "safempc/types.hpp"

namespace safempc {

enum class ModelKind { kSingleIntegrator, kDoubleIntegrator };

/// Disturbance channel configuration. Draws are i.i.d. zero-mean
/// Gaussian with variance sigma2 per channel, optionally rejection
/// sampled to |w_i| <= bound (bound <= 0 disables truncation, the
/// experiment default).
struct DisturbanceSpec {
  double sigma2 = 0.0;  // (m/s)^2
  double bound = 0.0;   // <= 0: unbounded

  double stddev() const { return std::sqrt(sigma2); }
};

/// Discrete-time point-mass model. The single integrator has state
/// [px, py] and velocity controls; the double integrator has state
/// [px, py, vx, vy] and acceleration controls, with the disturbance
/// entering the velocity channels directly.
struct ModelSpec {
  ModelKind kind = ModelKind::kSingleIntegrator;
  double dt = 0.05;  // s
  Vec u_min = Vec::Constant(2, -5.0);
  Vec u_max = Vec::Constant(2, 5.0);
  DisturbanceSpec disturbance;

  int state_dim() const {
    return kind == ModelKind::kSingleIntegrator ? 2 : 4;
  }
  int control_dim() const { return 2; }
  /// Position components as the leading block of the state.
  int position_dim() const { return 2; }
};

ModelSpec make_single_integrator(double dt = 0.05, double u_lim = 5.0);
ModelSpec make_double_integrator(double dt = 0.05, double u_lim = 5.0);

/// Elementwise saturation of u into [u_min, u_max]. Idempotent.
Control clamp_control(const ModelSpec& model, const Control& u);

/// One explicit-Euler step of the disturbed system. Pass a zero vector
/// (or an empty one) for w to step the undisturbed model.
State step(const ModelSpec& model, const State& x, const Control& u,
           const Vec& w);

State step(const ModelSpec& model, const State& x, const Control& u);

/// Draws one disturbance vector (state-sized; zero on position channels
/// for the double integrator).
Vec sample_disturbance(const ModelSpec& model, RngStream& rng);

/// Transition Jacobians d x'/dx and d x'/du. Both point-mass models are
/// linear, so these are constant.
void model_jacobians(const ModelSpec& model, Mat& A, Mat& B);

/// Per-step feedback toward a nominal state: (k, x, x_nominal) -> control.
using FeedbackPolicy =
    std::function<Control(int, const State&, const State&)>;

struct RolloutPairResult {
  Trajectory real;       // length T+1
  Trajectory nominal;    // length T+1
  ControlSequence feedback;  // length T, the k_fb applied at each step
};

/// Rolls the real/nominal pair forward under a shared noise sequence.
/// The nominal system evolves open loop and never sees the disturbance;
/// the real system applies per-step feedback toward the nominal state
/// and the given disturbance sequence. Every applied control is clamped.
RolloutPairResult rollout_pair(const ModelSpec& model, const State& x0,
                               const State& x0_nominal,
                               const ControlSequence& controls,
                               const ControlSequence& noise,
                               const FeedbackPolicy& feedback,
                               const std::vector<Vec>& disturbance);

}  // namespace safempc
