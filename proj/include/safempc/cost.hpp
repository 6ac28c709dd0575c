#pragma once

#include <cstdint>
#include <stdexcept>

#include "safempc/barrier.hpp"

namespace safempc {

/// Cost weights shared by the sampler and the trajectory optimizer.
/// All quadratics act on the position block of the state; the barrier
/// components carry their own weight q_beta. The crash cost is an
/// indicator surrogate added whenever the state violates a constraint,
/// kept out of the smooth expansions the optimizer consumes.
struct CostSpec {
  Vec goal = Vec::Zero(2);
  Mat Q = Mat::Identity(2, 2);
  double q_beta = 50.0;
  Mat phi_weight = 100.0 * Mat::Identity(2, 2);
  double crash_cost = 1e6;
  double lambda = 100.0;          // inverse temperature
  Mat Sigma = Mat::Identity(2, 2);  // exploration / control covariance

  /// Optional per-step position reference. Empty means regulate to
  /// goal; otherwise step k tracks reference[min(k, size-1)].
  Trajectory reference;
};

/// Evaluates running/terminal costs on states of layout [phys, beta].
/// beta_dim may be zero (plain states). When a field is attached, the
/// full costs include the crash indicator; the smooth_* variants and
/// the quadratic expansions never do.
class CostEvaluator {
public:
  CostEvaluator(CostSpec spec, int phys_dim, int beta_dim,
                const ObstacleField* field);

  int dim() const { return phys_dim_ + beta_dim_; }
  int phys_dim() const { return phys_dim_; }
  int beta_dim() const { return beta_dim_; }
  const CostSpec& spec() const { return spec_; }

  /// Position reference at step k (goal when no reference is set).
  /// k < 0 selects the terminal reference.
  const Vec& ref(int k) const;

  double running(const Vec& xb, int k) const;
  double terminal(const Vec& xb) const;

  /// phi(x_T) + sum_{k<T} q(x_k); control terms enter elsewhere.
  double cost_to_go(const Trajectory& traj) const;

  double smooth_running(const Vec& xb, int k) const;
  double smooth_terminal(const Vec& xb) const;

  /// Gradient and Hessian of the smooth running/terminal cost in the
  /// [phys, beta] coordinates.
  void running_expansion(const Vec& xb, int k, Vec& qx, Mat& qxx) const;
  void terminal_expansion(const Vec& xb, Vec& px, Mat& pxx) const;

private:
  double quad(const Vec& xb, const Eigen::Matrix2d& W, const Vec& r) const;
  double indicator(const Vec& xb) const;

  CostSpec spec_;
  int phys_dim_;
  int beta_dim_;
  const ObstacleField* field_;
  // Fixed-size copies of the position weights for the rollout hot path.
  Eigen::Matrix2d Q2_;
  Eigen::Matrix2d phi2_;
};

struct LipschitzEstimate {
  double L_q = 0.0;
  double L_phi = 0.0;
  /// True when some probe fell outside the safe set (the tube clips an
  /// obstacle); such probes are excluded from the gradient maxima.
  bool tube_intersects_unsafe = false;
};

/// The tube around the nominal trajectory never met the safe set.
class EmptyTube : public std::runtime_error {
public:
  EmptyTube() : std::runtime_error("tube entirely outside the safe set") {}
};

/// Probe-max estimate of the local Lipschitz constants of the running
/// and terminal costs over the radius-R tube around a (physical)
/// nominal trajectory, intersected with the safe interior. When an
/// embedded model is given, the barrier-state contribution to the cost
/// gradient is included and probes inside the blow-up region are
/// excluded. Deterministic given the seed.
LipschitzEstimate estimate_local_lipschitz(const CostEvaluator& cost,
                                           const EmbeddedModel* em,
                                           const Trajectory& nominal,
                                           double R, int n_probe,
                                           uint64_t seed);

}  // namespace safempc
