#include "safempc/trajopt.hpp"

#include <cmath>

namespace safempc {

TrackingCost::TrackingCost(const CostEvaluator* cost, Mat Ru)
    : cost_(cost), Ru_(std::move(Ru)) {
  require(cost_ != nullptr, "TrackingCost: null evaluator");
  require(Ru_.rows() == Ru_.cols(), "TrackingCost: Ru must be square");
}

double TrackingCost::running(const Vec& x, const Vec& u, int k) const {
  return cost_->smooth_running(x, k) + u.dot(Ru_ * u);
}

double TrackingCost::terminal(const Vec& x) const {
  return cost_->smooth_terminal(x);
}

void TrackingCost::state_expansion(const Vec& x, int k, Vec& qx,
                                   Mat& qxx) const {
  cost_->running_expansion(x, k, qx, qxx);
}

void TrackingCost::control_expansion(const Vec& u, int, Vec& qu,
                                     Mat& quu) const {
  qu = 2.0 * (Ru_ * u);
  quu = 2.0 * Ru_;
}

void TrackingCost::terminal_expansion(const Vec& x, Vec& px, Mat& pxx) const {
  cost_->terminal_expansion(x, px, pxx);
}

AugLagCost::AugLagCost(const CostEvaluator* cost, Mat Ru,
                       const ObstacleField* field, const Mat* lambda_al,
                       double mu)
    : base_(cost, std::move(Ru)),
      field_(field),
      lambda_al_(lambda_al),
      mu_(mu) {
  require(field_ != nullptr && lambda_al_ != nullptr, "AugLagCost: null refs");
  require(lambda_al_->cols() == field_->count(),
          "AugLagCost: one multiplier column per obstacle");
  require(mu_ > 0.0, "AugLagCost: mu > 0");
}

double AugLagCost::penalty(const Vec& x, int k) const {
  double p = 0.0;
  for (int i = 0; i < field_->count(); ++i) {
    const double m = -field_->h(x, i) + (*lambda_al_)(k, i) / mu_;
    if (m > 0.0) p += 0.5 * mu_ * m * m;
  }
  return p;
}

void AugLagCost::penalty_expansion(const Vec& x, int k, Vec& gx,
                                   Mat& gxx) const {
  for (int i = 0; i < field_->count(); ++i) {
    const double m = -field_->h(x, i) + (*lambda_al_)(k, i) / mu_;
    if (m <= 0.0) continue;
    const Eigen::Vector2d g0 = -field_->h_grad(x, i);  // grad of h0 = -h
    gx.head<2>() += mu_ * m * g0;
    gxx.topLeftCorner<2, 2>() += mu_ * g0 * g0.transpose();
  }
}

double AugLagCost::running(const Vec& x, const Vec& u, int k) const {
  return base_.running(x, u, k) + penalty(x, k);
}

double AugLagCost::terminal(const Vec& x) const {
  return base_.terminal(x) +
         penalty(x, static_cast<int>(lambda_al_->rows()) - 1);
}

void AugLagCost::state_expansion(const Vec& x, int k, Vec& qx,
                                 Mat& qxx) const {
  base_.state_expansion(x, k, qx, qxx);
  penalty_expansion(x, k, qx, qxx);
}

void AugLagCost::control_expansion(const Vec& u, int k, Vec& qu,
                                   Mat& quu) const {
  base_.control_expansion(u, k, qu, quu);
}

void AugLagCost::terminal_expansion(const Vec& x, Vec& px, Mat& pxx) const {
  base_.terminal_expansion(x, px, pxx);
  penalty_expansion(x, static_cast<int>(lambda_al_->rows()) - 1, px, pxx);
}

namespace {

/// Forward rollout; open loop when kff is null, otherwise the affine
/// policy u = U_ref + alpha kff + K (x - X_ref). Controls are clamped.
/// Returns false on barrier blow-up or non-finite cost.
bool forward_roll(const EmbeddedModel& em, const SolverCost& cost,
                  const Vec& xb0, const Trajectory& Xref,
                  const ControlSequence& Uref, const std::vector<Vec>* kff,
                  const std::vector<Mat>* K, double alpha, Trajectory& X,
                  ControlSequence& U, double& total) {
  const int T = static_cast<int>(Uref.size());
  X.clear();
  X.reserve(T + 1);
  U.clear();
  U.reserve(T);
  X.push_back(xb0);
  total = 0.0;
  Vec x = xb0;
  for (int k = 0; k < T; ++k) {
    Vec u = Uref[k];
    if (kff) u += alpha * (*kff)[k] + (*K)[k] * (x - Xref[k]);
    u = clamp_control(em.model(), u);
    total += cost.running(x, u, k);
    const auto next = em.step(x, u);
    if (!next) return false;
    x = *next;
    X.push_back(x);
    U.push_back(std::move(u));
  }
  total += cost.terminal(x);
  return std::isfinite(total);
}

bool backward_pass(const EmbeddedModel& em, const SolverCost& cost,
                   const Trajectory& X, const ControlSequence& U, double reg,
                   double gain_clip, std::vector<Vec>& kff,
                   std::vector<Mat>& K) {
  const int T = static_cast<int>(U.size());
  const int d = em.dim();
  const int m = em.control_dim();
  kff.assign(T, Vec::Zero(m));
  K.assign(T, Mat::Zero(m, d));

  Vec Vx;
  Mat Vxx;
  cost.terminal_expansion(X[T], Vx, Vxx);
  Mat A, B;
  Vec qx, qu;
  Mat qxx, quu;
  for (int k = T - 1; k >= 0; --k) {
    if (!em.jacobians(X[k], U[k], A, B)) return false;
    cost.state_expansion(X[k], k, qx, qxx);
    cost.control_expansion(U[k], k, qu, quu);

    const Vec Qx = qx + A.transpose() * Vx;
    const Vec Qu = qu + B.transpose() * Vx;
    const Mat Qxx = qxx + A.transpose() * Vxx * A;
    const Mat Qux = B.transpose() * Vxx * A;
    Mat Quu = quu + B.transpose() * Vxx * B;
    Quu = 0.5 * (Quu + Quu.transpose());

    Eigen::LLT<Mat> llt(Quu + reg * Mat::Identity(m, m));
    if (llt.info() != Eigen::Success) return false;
    kff[k] = -llt.solve(Qu);
    Mat Kk = -llt.solve(Qux);
    if (gain_clip > 0.0) {
      const double s = Kk.jacobiSvd().singularValues()(0);
      if (s > gain_clip) Kk *= gain_clip / s;
    }
    K[k] = Kk;

    Vx = Qx + Kk.transpose() * (Quu * kff[k] + Qu) + Qux.transpose() * kff[k];
    Vxx = Qxx + Kk.transpose() * Quu * Kk + Kk.transpose() * Qux +
          Qux.transpose() * Kk;
    Vxx = 0.5 * (Vxx + Vxx.transpose());
  }
  return true;
}

}  // namespace

TrajOptSolution ilqg_solve(const EmbeddedModel& em, const SolverCost& cost,
                           const Vec& xb0, const ControlSequence& U_init,
                           const TrajOptOptions& opts) {
  const int T = static_cast<int>(U_init.size());
  require(T >= 1, "ilqg_solve: horizon >= 1");
  require(xb0.size() == em.dim(), "ilqg_solve: state dim");

  TrajOptSolution sol;
  Trajectory X;
  ControlSequence U;
  double cur = 0.0;
  if (!forward_roll(em, cost, xb0, {}, U_init, nullptr, nullptr, 0.0, X, U,
                    cur)) {
    // warm start blew up; fall back to rest
    const ControlSequence zeros(T, Vec::Zero(em.control_dim()));
    if (!forward_roll(em, cost, xb0, {}, zeros, nullptr, nullptr, 0.0, X, U,
                      cur)) {
      sol.X.assign(1, xb0);
      sol.U = U_init;
      sol.K.assign(T, Mat::Zero(em.control_dim(), em.dim()));
      return sol;  // infeasible start; converged stays false, cost infinite
    }
  }
  sol.cost_trace.push_back(cur);

  double reg = opts.reg_init;
  std::vector<Vec> kff;
  std::vector<Mat> K;
  bool converged = false;
  int it = 0;
  while (it < opts.max_iters && !converged) {
    ++it;
    while (!backward_pass(em, cost, X, U, reg, opts.gain_clip, kff, K)) {
      if (reg >= opts.reg_max) throw RegularizationExhausted();
      reg = std::max(reg * opts.reg_factor, opts.reg_min);
    }

    bool accepted = false;
    double best = std::numeric_limits<double>::infinity();
    double alpha = 1.0;
    for (int s = 0; s < opts.line_search_steps; ++s, alpha *= 0.5) {
      Trajectory Xc;
      ControlSequence Uc;
      double c = 0.0;
      if (!forward_roll(em, cost, xb0, X, U, &kff, &K, alpha, Xc, Uc, c))
        continue;
      best = std::min(best, c);
      if (c < cur) {
        const double drop = cur - c;
        X = std::move(Xc);
        U = std::move(Uc);
        cur = c;
        sol.cost_trace.push_back(cur);
        accepted = true;
        if (drop < opts.tol * std::max(1.0, std::abs(cur))) converged = true;
        reg = reg <= opts.reg_min ? 0.0 : reg / opts.reg_factor;
        break;
      }
    }
    if (!accepted) {
      if (std::isfinite(best) &&
          best - cur < opts.tol * std::max(1.0, std::abs(cur))) {
        converged = true;  // stationary: nothing left to gain
        break;
      }
      if (reg >= opts.reg_max) break;
      reg = std::max(reg * opts.reg_factor, opts.reg_min);
    }
  }

  // gains consistent with the final trajectory
  if (!backward_pass(em, cost, X, U, 0.0, opts.gain_clip, kff, K)) {
    double r = std::max(reg, opts.reg_min);
    while (!backward_pass(em, cost, X, U, r, opts.gain_clip, kff, K)) {
      if (r >= opts.reg_max) throw RegularizationExhausted();
      r *= opts.reg_factor;
    }
  }
  sol.X = std::move(X);
  sol.U = std::move(U);
  sol.K = std::move(K);
  sol.converged = converged;
  sol.final_cost = cur;
  sol.iterations = it;
  return sol;
}

ALResult al_outer_loop(const EmbeddedModel& plain, const CostEvaluator& cost,
                       const ObstacleField& constraints, const Vec& x0,
                       const ControlSequence& U_init,
                       const TrajOptOptions& inner, const ALOptions& opts) {
  require(plain.beta_dim() == 0, "al_outer_loop: plain model only");
  const int T = static_cast<int>(U_init.size());
  const Mat Ru =
      inner.control_weight * Mat::Identity(plain.control_dim(),
                                           plain.control_dim());

  ALResult res;
  res.lambda_al = Mat::Zero(T + 1, constraints.count());
  res.mu = opts.mu_init;
  ControlSequence U = U_init;
  double prev_viol = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    res.outer_iters = outer + 1;
    const AugLagCost alc(&cost, Ru, &constraints, &res.lambda_al, res.mu);
    res.sol = ilqg_solve(plain, alc, x0, U, inner);
    U = res.sol.U;

    double viol = 0.0;
    for (int k = 0; k <= T; ++k) {
      for (int i = 0; i < constraints.count(); ++i) {
        const double h0 = -constraints.h(res.sol.X[k], i);
        viol = std::max(viol, h0);
        res.lambda_al(k, i) =
            std::max(0.0, res.lambda_al(k, i) + res.mu * h0);
      }
    }
    res.max_violation = std::max(0.0, viol);
    if (res.max_violation <= opts.viol_tol) break;
    if (viol > opts.improve_ratio * prev_viol) res.mu *= opts.mu_growth;
    prev_viol = viol;
  }
  return res;
}

FeedbackPolicy feedback_policy(const EmbeddedModel& em,
                               const TrajOptSolution& sol,
                               bool feedback_on_beta) {
  return [model = &em, aug = feedback_policy_augmented(sol, em.beta_dim(),
                                                       feedback_on_beta)](
             int k, const State& x, const State& xn) -> Control {
    return aug(k, model->augment_capped(x), model->augment_capped(xn));
  };
}

AugFeedbackPolicy feedback_policy_augmented(const TrajOptSolution& sol,
                                            int beta_dim,
                                            bool feedback_on_beta) {
  const int T = static_cast<int>(sol.K.size());
  return [K = sol.K, T, beta_dim, feedback_on_beta](
             int k, const Vec& xb, const Vec& xbn) -> Control {
    require(k >= 0 && k < T, "feedback_policy: step out of range");
    Vec e = xb - xbn;
    if (!feedback_on_beta && beta_dim > 0) e.tail(beta_dim).setZero();
    return K[k] * e;
  };
}

}  // namespace safempc
