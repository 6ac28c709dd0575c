#pragma once

#include <optional>

#include "safempc/model.hpp"
#include "safempc/obstacles.hpp"

namespace safempc {

/// Barrier function shapes over the constraint value h.
/// kInverse and kLogShifted diverge as h -> 0+ and trip a blow-up below
/// epsilon_h; kExponential exp(-gamma h) stays bounded, so unsafe states
/// must be rejected through the crash indicator in the cost instead.
enum class BarrierKind { kInverse, kLogShifted, kExponential };

/// kSingleSummed folds all constraints into one scalar barrier state;
/// kVector keeps one component per obstacle.
enum class BarrierAggregation { kSingleSummed, kVector };

struct BarrierSpec {
  BarrierKind kind = BarrierKind::kInverse;
  BarrierAggregation aggregation = BarrierAggregation::kSingleSummed;
  double epsilon_h = 1e-6;  // blow-up floor on h for the unbounded kinds
  double gamma = 1.0;       // rate of the exponential kind
  double value_cap = 1e12;  // cap applied before barrier values enter costs

  bool unbounded_kind() const { return kind != BarrierKind::kExponential; }
};

/// B(h). For unbounded kinds, h <= epsilon_h yields nullopt (blow-up).
std::optional<double> barrier_eval(const BarrierSpec& spec, double h);

/// Saturating variant: h is floored at epsilon_h and the value is capped
/// at value_cap, so it is defined for every h. Used where a finite
/// surrogate is needed (feedback on unsafe states, plotting).
double barrier_eval_capped(const BarrierSpec& spec, double h);

/// dB/dh of the uncapped barrier; caller guarantees h > epsilon_h for
/// unbounded kinds.
double barrier_slope(const BarrierSpec& spec, double h);

/// Barrier-state vector at a state already known (or assumed) safe:
/// B(h_i(x)) per constraint, or their sum in single-summed mode.
/// nullopt on blow-up.
std::optional<Vec> barrier_state(const BarrierSpec& spec,
                                 const ObstacleField& field, const Vec& x);

/// Like barrier_state but saturating, never fails.
Vec barrier_state_capped(const BarrierSpec& spec, const ObstacleField& field,
                         const Vec& x);

/// One-step barrier-state recursion: the barrier evaluated at the
/// undisturbed successor F(x, u). nullopt if the successor leaves the
/// safe interior (blow-up).
std::optional<Vec> dbas_step(const BarrierSpec& spec,
                             const ObstacleField& field,
                             const ModelSpec& model, const State& x,
                             const Control& u);

/// The safety-embedded model: physical dynamics with the barrier state
/// appended, xb = [x, beta]. Used wherever a plain model would be; also
/// provides the transition Jacobians the trajectory optimizer needs
/// (analytic for the point-mass/circle composition, finite differences
/// as a cross-check).
class EmbeddedModel {
public:
  EmbeddedModel(ModelSpec model, ObstacleField field, BarrierSpec barrier);

  const ModelSpec& model() const { return model_; }
  const ObstacleField& field() const { return field_; }
  const BarrierSpec& barrier() const { return barrier_; }

  int phys_dim() const { return model_.state_dim(); }
  int beta_dim() const { return beta_dim_; }
  int dim() const { return phys_dim() + beta_dim(); }
  int control_dim() const { return model_.control_dim(); }

  /// Augments a physical state; nullopt on blow-up.
  std::optional<Vec> augment(const State& x) const;
  /// Saturating augmentation (capped barrier), never fails.
  Vec augment_capped(const State& x) const;

  /// Rollout fast path: physical step, barrier recursion, and the
  /// successor's safe-set margin in one obstacle pass, written into a
  /// caller-owned buffer. Returns false on barrier blow-up; the physical
  /// head of out is valid either way, the barrier tail and min_h_next
  /// only on success. Same values as step() + field().min_h().
  bool step_fused(const Vec& xb, const Control& u, Vec& out,
                  double& min_h_next) const;

  Eigen::Ref<const Vec> phys(const Vec& xb) const {
    return xb.head(phys_dim());
  }
  Eigen::Ref<const Vec> beta(const Vec& xb) const {
    return xb.tail(beta_dim());
  }

  /// One undisturbed step of the embedded dynamics; nullopt on blow-up.
  std::optional<Vec> step(const Vec& xb, const Control& u) const;

  /// Jacobians of the embedded transition at (xb, u). The barrier rows
  /// require the successor to stay in the interior; blow-up propagates
  /// as false.
  bool jacobians(const Vec& xb, const Control& u, Mat& A, Mat& B) const;

  /// Central finite-difference Jacobians, for cross-checking.
  bool jacobians_fd(const Vec& xb, const Control& u, Mat& A, Mat& B,
                    double eps = 1e-5) const;

private:
  ModelSpec model_;
  ObstacleField field_;
  BarrierSpec barrier_;
  int beta_dim_ = 0;
};

}  // namespace safempc
