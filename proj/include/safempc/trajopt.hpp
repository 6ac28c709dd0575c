#pragma once

#include <limits>
#include <stdexcept>

#include "safempc/cost.hpp"

namespace safempc {

struct TrajOptOptions {
  int max_iters = 100;
  double tol = 1e-6;        // relative cost decrease for convergence
  double reg_init = 0.0;    // Levenberg regularization on Quu
  double reg_factor = 10.0;
  double reg_min = 1e-6;
  double reg_max = 1e10;
  int line_search_steps = 10;  // alpha = 0.5^i, i = 0..steps-1
  double gain_clip = 50.0;     // spectral-norm cap on the feedback gains
  double control_weight = 0.5; // running control cost u^T (w I) u
};

struct TrajOptSolution {
  Trajectory X;          // nominal (augmented) states, length T+1
  ControlSequence U;     // open-loop controls, length T
  std::vector<Mat> K;    // feedback gains, length T, each m x dim
  bool converged = false;
  double final_cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> cost_trace;  // accepted costs, starting at the initial
};

/// No positive-definite backward pass found at the regularization ceiling.
class RegularizationExhausted : public std::runtime_error {
public:
  RegularizationExhausted()
      : std::runtime_error("backward pass not positive definite at reg_max") {}
};

/// Stage cost interface the solver optimizes. State and control terms
/// are separable here (no cross terms), which covers the tracking and
/// augmented-Lagrangian costs used in the experiments.
class SolverCost {
public:
  virtual ~SolverCost() = default;
  virtual double running(const Vec& x, const Vec& u, int k) const = 0;
  virtual double terminal(const Vec& x) const = 0;
  virtual void state_expansion(const Vec& x, int k, Vec& qx,
                               Mat& qxx) const = 0;
  virtual void control_expansion(const Vec& u, int k, Vec& qu,
                                 Mat& quu) const = 0;
  virtual void terminal_expansion(const Vec& x, Vec& px, Mat& pxx) const = 0;
};

/// Smooth tracking cost (CostEvaluator quadratics, crash indicator
/// excluded) plus a quadratic control penalty.
class TrackingCost : public SolverCost {
public:
  TrackingCost(const CostEvaluator* cost, Mat Ru);

  double running(const Vec& x, const Vec& u, int k) const override;
  double terminal(const Vec& x) const override;
  void state_expansion(const Vec& x, int k, Vec& qx, Mat& qxx) const override;
  void control_expansion(const Vec& u, int k, Vec& qu,
                         Mat& quu) const override;
  void terminal_expansion(const Vec& x, Vec& px, Mat& pxx) const override;

private:
  const CostEvaluator* cost_;
  Mat Ru_;
};

/// Tracking cost plus the Powell-Hestenes-Rockafellar penalty
/// (mu/2) || max(0, h0 + lambda/mu) ||^2 over per-step obstacle
/// constraints h0_i(x) = -h_i(x) <= 0. The Hessian uses the
/// Gauss-Newton approximation (gradient outer products only).
class AugLagCost : public SolverCost {
public:
  /// lambda_al is (T+1) x n_obstacles, row k holding step k's multipliers.
  AugLagCost(const CostEvaluator* cost, Mat Ru, const ObstacleField* field,
             const Mat* lambda_al, double mu);

  double running(const Vec& x, const Vec& u, int k) const override;
  double terminal(const Vec& x) const override;
  void state_expansion(const Vec& x, int k, Vec& qx, Mat& qxx) const override;
  void control_expansion(const Vec& u, int k, Vec& qu,
                         Mat& quu) const override;
  void terminal_expansion(const Vec& x, Vec& px, Mat& pxx) const override;

  double penalty(const Vec& x, int k) const;

private:
  void penalty_expansion(const Vec& x, int k, Vec& gx, Mat& gxx) const;

  TrackingCost base_;
  const ObstacleField* field_;
  const Mat* lambda_al_;
  double mu_;
};

/// Iterative LQG over the embedded dynamics: Gauss-Newton backward pass
/// with Levenberg regularization, backtracking line search with control
/// clamping inside the forward rollouts, barrier blow-up rejected as a
/// failed step. A final backward pass at the solution produces the
/// returned gains.
TrajOptSolution ilqg_solve(const EmbeddedModel& em, const SolverCost& cost,
                           const Vec& xb0, const ControlSequence& U_init,
                           const TrajOptOptions& opts);

struct ALOptions {
  int max_outer = 20;
  double mu_init = 1.0;
  double mu_growth = 5.0;
  double viol_tol = 1e-3;      // target max constraint violation
  double improve_ratio = 0.5;  // grow mu unless violation shrank this much
};

struct ALResult {
  TrajOptSolution sol;
  Mat lambda_al;  // final multipliers, (T+1) x n_obstacles
  double mu = 0.0;
  double max_violation = 0.0;
  int outer_iters = 0;
};

/// Augmented-Lagrangian trajectory optimization on a plain (no barrier)
/// model: alternates inner ilqg_solve on the penalized cost with the
/// multiplier update lambda <- max(0, lambda + mu h0) at every step and
/// constraint; mu grows monotonically when progress stalls.
ALResult al_outer_loop(const EmbeddedModel& plain, const CostEvaluator& cost,
                       const ObstacleField& constraints, const Vec& x0,
                       const ControlSequence& U_init,
                       const TrajOptOptions& inner, const ALOptions& opts);

/// Wraps a solution's gains as the per-step safe feedback
/// k_fb = K_k (xb - xb*), both states augmented from their physical
/// parts with the capped barrier (finite even when momentarily unsafe).
/// With feedback_on_beta false only the physical error enters.
FeedbackPolicy feedback_policy(const EmbeddedModel& em,
                               const TrajOptSolution& sol,
                               bool feedback_on_beta = true);

/// Feedback on states that already carry their barrier components:
/// (k, xb, xb_nominal) -> control. Rollouts that maintain augmented
/// states use this to skip the re-augmentation feedback_policy does.
using AugFeedbackPolicy = std::function<Control(int, const Vec&, const Vec&)>;

/// The gain application behind feedback_policy, k_fb = K_k (xb - xb*),
/// with the trailing beta_dim components of the error zeroed when
/// feedback_on_beta is false.
AugFeedbackPolicy feedback_policy_augmented(const TrajOptSolution& sol,
                                            int beta_dim,
                                            bool feedback_on_beta = true);

}  // namespace safempc
