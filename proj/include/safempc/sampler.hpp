#pragma once

#include <cstdint>
#include <limits>

#include "safempc/femonitor.hpp"
#include "safempc/trajopt.hpp"

namespace safempc {

struct SamplerSpec {
  int N = 256;           // samples per MPC step
  int T = 40;            // planning horizon
  double lambda = 10.0;  // inverse temperature
  Mat Sigma = Mat::Identity(2, 2);  // exploration covariance
  /// Nominal-cost threshold for the blend and the nominal-state gate.
  /// <= 0 means auto: the MPC loop substitutes alpha_auto_scale times
  /// the cost of the current safe plan. sais() uses the value as given.
  double alpha_thresh = 0.0;
  double beta_mix = 0.0;  // in [0,1); scales the feedback-effort weight
};

/// One sampled batch from the dual-system rollout. All cost vectors
/// have length N and are finite (dead samples carry the barrier value
/// cap). crash_n is true iff the feedback rollout left the safe set.
struct RolloutBatch {
  std::vector<ControlSequence> E;  // N noise sequences of length T
  std::vector<double> S;           // nominal-only cost-to-go
  std::vector<double> S_hat;       // feedback-rollout cost-to-go
  std::vector<double> S_real;      // real-system cost estimate
  std::vector<double> S_nom;       // blended cost the weights act on
  std::vector<uint8_t> crash;
  std::vector<double> max_dev;  // per-sample max_k ||x_k - x*_k||
};

struct StepDiagnostics {
  double s_min = 0.0;
  double s_mean = 0.0;
  double s_max = 0.0;
  double ess = 0.0;  // effective sample size 1 / sum w^2
  double crash_fraction = 0.0;
  int argmax_sample = 0;   // highest-weight sample index
  int nominal_branch = 0;  // 1 when the nominal re-anchored to the real state
  double f_hat = 0.0;      // free energy of the feedback-rollout batch
  bool all_crashed = false;
};

/// exp(-(S_n - min S)/lambda) normalized to sum 1. Weights decrease
/// with cost; min-subtraction keeps the exponentials in range.
std::vector<double> mppi_weights(const std::vector<double>& costs,
                                 double lambda);

/// u_k + sum_n w_n eps_k^n (no clamping, no smoothing).
ControlSequence mppi_update(const ControlSequence& U,
                            const std::vector<ControlSequence>& E,
                            const std::vector<double>& weights);

/// Receding-horizon shift: drop the first control, repeat the last.
ControlSequence shift_plan(const ControlSequence& U);

struct MppiStepResult {
  ControlSequence U;       // updated plan; U[0] is this step's command
  ControlSequence U_next;  // shifted plan for the next MPC step
  StepDiagnostics diag;
};

/// One MPC step of MPPI run directly on the safety-embedded model:
/// N open-loop rollouts from the augmented state xb0, cost-to-gos with
/// barrier-state and crash terms plus the control coupling, weights,
/// update, shift. Samples whose rollout leaves the safe set (or blows
/// the barrier up) cost the cap. If every sample dies the plan is
/// returned unchanged with all_crashed set.
MppiStepResult bas_mppi_step(const EmbeddedModel& em, const CostEvaluator& cost,
                             const SamplerSpec& spec, const Vec& xb0,
                             const ControlSequence& U, uint64_t run_seed,
                             int mpc_step);

/// Dual-system importance sampler: each sample rolls the feedback
/// system x (plan + noise + k_fb) and the nominal system x* (plan +
/// noise) under shared noise and no disturbance, accumulating
///   S_hat += q(x)  + (lambda(1-beta_mix)/2) k_fb' Sigma^-1 k_fb
///   S     += q(x*)
///   S_real += q(x) + (lambda(1-beta_mix)/2)(u+k_fb)' Sigma^-1 (u+2eps+k_fb)
/// per step, terminal costs on all three, then
///   S_nom = S/2 + max(min(S_hat, alpha), S)/2
///         + (lambda/2) sum_k (u_k' Sigma^-1 u_k + 2 u_k' Sigma^-1 eps_k).
/// Barrier blow-up in either rollout caps all four costs for that
/// sample; crash marks feedback rollouts that left the safe set.
RolloutBatch sais(const EmbeddedModel& em, const CostEvaluator& cost,
                  const SamplerSpec& spec, const FeedbackPolicy& K_safe,
                  const State& x0, const State& x0_nominal,
                  const ControlSequence& U, uint64_t run_seed, int mpc_step);

struct SaRmppiOptions {
  TrajOptOptions trajopt;
  int resolve_iters = 5;          // warm re-solve budget per MPC step
  double alpha_auto_scale = 2.0;  // auto threshold = scale * plan cost
  int n_probe = 100;              // Lipschitz probes per tube state
  int n_boot = 200;               // bootstrap resamples for E_M_V
  double fixed_R = 0.0;           // > 0 overrides the batch tube radius
  bool feedback_on_beta = true;
};

struct SaRmppiState {
  State x_nom;
  ControlSequence U;
  TrajOptSolution safe_plan;
  bool has_plan = false;
  double prev_F_real = std::numeric_limits<double>::quiet_NaN();
};

/// Fresh loop state: nominal at x0, zero plan of length spec.T. The
/// first sa_rmppi_step performs the cold trajectory solve.
SaRmppiState sa_rmppi_init(const EmbeddedModel& em, const SamplerSpec& spec,
                           const State& x0);

struct SaRmppiStepResult {
  Control u_exec;     // clamped command for the real system
  Control k_fb_exec;  // feedback component of u_exec
  StepDiagnostics diag;
  FreeEnergyReport fe;
  double alpha = 0.0;  // threshold used this step
  double R = 0.0;      // tube radius used this step
};

/// One MPC step of the robust loop: re-solve the safe plan around the
/// nominal state (warm-started), run sais from the measured real state,
/// reweight and update the plan, assemble the free-energy report, gate
/// the nominal update (re-anchor to the real state only when the
/// feedback batch's free energy stays under alpha, else keep
/// propagating), and emit the first command with safe feedback applied.
/// st is advanced in place.
SaRmppiStepResult sa_rmppi_step(const EmbeddedModel& em,
                                const CostEvaluator& cost,
                                const SamplerSpec& spec,
                                const SaRmppiOptions& opts,
                                const State& x_real, SaRmppiState& st,
                                uint64_t run_seed, int mpc_step);

}  // namespace safempc
