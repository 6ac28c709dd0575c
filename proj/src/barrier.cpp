#include "safempc/barrier.hpp"

#include <cmath>
#include <limits>

namespace safempc {

std::optional<double> barrier_eval(const BarrierSpec& spec, double h) {
  if (spec.unbounded_kind() && h <= spec.epsilon_h) return std::nullopt;
  switch (spec.kind) {
    case BarrierKind::kInverse:
      return 1.0 / h;
    case BarrierKind::kLogShifted:
      return -std::log(h / (1.0 + h));
    case BarrierKind::kExponential:
      return std::exp(-spec.gamma * h);
  }
  return std::nullopt;
}

double barrier_eval_capped(const BarrierSpec& spec, double h) {
  const double hf =
      spec.unbounded_kind() ? std::max(h, spec.epsilon_h) : h;
  double v = 0.0;
  switch (spec.kind) {
    case BarrierKind::kInverse:
      v = 1.0 / hf;
      break;
    case BarrierKind::kLogShifted:
      v = -std::log(hf / (1.0 + hf));
      break;
    case BarrierKind::kExponential:
      v = std::exp(-spec.gamma * hf);
      break;
  }
  return std::min(v, spec.value_cap);
}

double barrier_slope(const BarrierSpec& spec, double h) {
  switch (spec.kind) {
    case BarrierKind::kInverse:
      return -1.0 / (h * h);
    case BarrierKind::kLogShifted:
      return -1.0 / (h * (1.0 + h));
    case BarrierKind::kExponential:
      return -spec.gamma * std::exp(-spec.gamma * h);
  }
  return 0.0;
}

namespace {

int beta_dim_for(const BarrierSpec& spec, const ObstacleField& field) {
  if (spec.aggregation == BarrierAggregation::kSingleSummed) return 1;
  return field.count();
}

}  // namespace

std::optional<Vec> barrier_state(const BarrierSpec& spec,
                                 const ObstacleField& field, const Vec& x) {
  const int nb = beta_dim_for(spec, field);
  Vec beta = Vec::Zero(nb);
  for (int i = 0; i < field.count(); ++i) {
    const auto b = barrier_eval(spec, field.h(x, i));
    if (!b) return std::nullopt;
    const double v = std::min(*b, spec.value_cap);
    if (spec.aggregation == BarrierAggregation::kSingleSummed)
      beta[0] += v;
    else
      beta[i] = v;
  }
  return beta;
}

Vec barrier_state_capped(const BarrierSpec& spec, const ObstacleField& field,
                         const Vec& x) {
  const int nb = beta_dim_for(spec, field);
  Vec beta = Vec::Zero(nb);
  for (int i = 0; i < field.count(); ++i) {
    const double v = barrier_eval_capped(spec, field.h(x, i));
    if (spec.aggregation == BarrierAggregation::kSingleSummed)
      beta[0] += v;
    else
      beta[i] = v;
  }
  if (spec.aggregation == BarrierAggregation::kSingleSummed)
    beta[0] = std::min(beta[0], spec.value_cap);
  return beta;
}

std::optional<Vec> dbas_step(const BarrierSpec& spec,
                             const ObstacleField& field,
                             const ModelSpec& model, const State& x,
                             const Control& u) {
  return barrier_state(spec, field, step(model, x, u));
}

EmbeddedModel::EmbeddedModel(ModelSpec model, ObstacleField field,
                             BarrierSpec barrier)
    : model_(std::move(model)),
      field_(std::move(field)),
      barrier_(barrier),
      beta_dim_(beta_dim_for(barrier, field_)) {}

std::optional<Vec> EmbeddedModel::augment(const State& x) const {
  const auto beta = barrier_state(barrier_, field_, x);
  if (!beta) return std::nullopt;
  Vec xb(dim());
  xb.head(phys_dim()) = x;
  xb.tail(beta_dim()) = *beta;
  return xb;
}

Vec EmbeddedModel::augment_capped(const State& x) const {
  Vec xb(dim());
  xb.head(phys_dim()) = x;
  xb.tail(beta_dim()) = barrier_state_capped(barrier_, field_, x);
  return xb;
}

std::optional<Vec> EmbeddedModel::step(const Vec& xb, const Control& u) const {
  const State next = safempc::step(model_, phys(xb), u);
  const auto beta = barrier_state(barrier_, field_, next);
  if (!beta) return std::nullopt;
  Vec out(dim());
  out.head(phys_dim()) = next;
  out.tail(beta_dim()) = *beta;
  return out;
}

bool EmbeddedModel::step_fused(const Vec& xb, const Control& u, Vec& out,
                               double& min_h_next) const {
  const int n = phys_dim();
  require(out.size() == dim(), "step_fused: output dim");
  if (model_.kind == ModelKind::kSingleIntegrator) {
    out.head(n) = xb.head(n) + u * model_.dt;
  } else {
    out.head<2>() = xb.head<2>() + xb.segment<2>(2) * model_.dt;
    out.segment<2>(2) = xb.segment<2>(2) + u * model_.dt;
  }
  const double px = out[0], py = out[1];
  const int nc = field_.count();
  double mh = std::numeric_limits<double>::infinity();
  if (barrier_.aggregation == BarrierAggregation::kSingleSummed) {
    double sum = 0.0;
    for (int i = 0; i < nc; ++i) {
      const double h = field_.h_at(px, py, i);
      if (h < mh) mh = h;
      const auto b = barrier_eval(barrier_, h);
      if (!b) return false;
      sum += std::min(*b, barrier_.value_cap);
    }
    out[n] = sum;
  } else {
    for (int i = 0; i < nc; ++i) {
      const double h = field_.h_at(px, py, i);
      if (h < mh) mh = h;
      const auto b = barrier_eval(barrier_, h);
      if (!b) return false;
      out[n + i] = std::min(*b, barrier_.value_cap);
    }
  }
  min_h_next = mh;
  return true;
}

bool EmbeddedModel::jacobians(const Vec& xb, const Control& u, Mat& A,
                              Mat& B) const {
  const int n = phys_dim();
  const int m = control_dim();

  Mat Ap, Bp;
  model_jacobians(model_, Ap, Bp);

  A = Mat::Zero(dim(), dim());
  B = Mat::Zero(dim(), m);
  A.topLeftCorner(n, n) = Ap;
  B.topRows(n) = Bp;

  const State next = safempc::step(model_, phys(xb), u);
  // d beta'_i / d(x, u) = B'(h_i(x')) grad_p h_i(x')^T [dp'/dx, dp'/du]
  const Mat Apos = Ap.topRows(2);
  const Mat Bpos = Bp.topRows(2);
  for (int i = 0; i < field_.count(); ++i) {
    const double h = field_.h(next, i);
    if (barrier_.unbounded_kind() && h <= barrier_.epsilon_h) return false;
    const double s = barrier_slope(barrier_, h);
    const Eigen::RowVector2d g = field_.h_grad(next, i).transpose();
    const int row = n + (barrier_.aggregation ==
                                 BarrierAggregation::kSingleSummed
                             ? 0
                             : i);
    A.row(row).head(n) += s * (g * Apos);
    B.row(row) += s * (g * Bpos);
  }
  return true;
}

bool EmbeddedModel::jacobians_fd(const Vec& xb, const Control& u, Mat& A,
                                 Mat& B, double eps) const {
  const int d = dim();
  const int m = control_dim();
  A.resize(d, d);
  B.resize(d, m);
  Vec xp = xb, xm = xb;
  for (int j = 0; j < d; ++j) {
    xp = xb;
    xm = xb;
    xp[j] += eps;
    xm[j] -= eps;
    const auto fp = step(xp, u);
    const auto fm = step(xm, u);
    if (!fp || !fm) return false;
    A.col(j) = (*fp - *fm) / (2.0 * eps);
  }
  Control up = u, um = u;
  for (int j = 0; j < m; ++j) {
    up = u;
    um = u;
    up[j] += eps;
    um[j] -= eps;
    const auto fp = step(xb, up);
    const auto fm = step(xb, um);
    if (!fp || !fm) return false;
    B.col(j) = (*fp - *fm) / (2.0 * eps);
  }
  return true;
}

}  // namespace safempc
