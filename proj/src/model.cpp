#include "safempc/model.hpp"

namespace safempc {

ModelSpec make_single_integrator(double dt, double u_lim) {
  ModelSpec m;
  m.kind = ModelKind::kSingleIntegrator;
  m.dt = dt;
  m.u_min = Vec::Constant(2, -u_lim);
  m.u_max = Vec::Constant(2, u_lim);
  return m;
}

ModelSpec make_double_integrator(double dt, double u_lim) {
  ModelSpec m = make_single_integrator(dt, u_lim);
  m.kind = ModelKind::kDoubleIntegrator;
  return m;
}

Control clamp_control(const ModelSpec& model, const Control& u) {
  require(u.size() == model.control_dim(), "clamp_control: control dim");
  return u.cwiseMax(model.u_min).cwiseMin(model.u_max);
}

State step(const ModelSpec& model, const State& x, const Control& u,
           const Vec& w) {
  const int n = model.state_dim();
  require(x.size() == n, "step: state dim");
  require(u.size() == model.control_dim(), "step: control dim");
  const bool has_w = w.size() != 0;
  if (has_w) require(w.size() == n, "step: disturbance dim");

  State next(n);
  if (model.kind == ModelKind::kSingleIntegrator) {
    // x' = x + (u + w) dt
    next = x + u * model.dt;
    if (has_w) next += w * model.dt;
  } else {
    // p' = p + v dt, v' = v + u dt + w_v (disturbance on velocity only)
    next.head<2>() = x.head<2>() + x.tail<2>() * model.dt;
    next.tail<2>() = x.tail<2>() + u * model.dt;
    if (has_w) next.tail<2>() += w.tail<2>();
  }
  return next;
}

State step(const ModelSpec& model, const State& x, const Control& u) {
  return step(model, x, u, Vec());
}

Vec sample_disturbance(const ModelSpec& model, RngStream& rng) {
  const double sd = model.disturbance.stddev();
  const double bound = model.disturbance.bound;
  Vec w = Vec::Zero(model.state_dim());
  if (sd == 0.0) return w;
  if (model.kind == ModelKind::kSingleIntegrator) {
    for (int i = 0; i < w.size(); ++i) w[i] = rng.truncated_normal(sd, bound);
  } else {
    for (int i = 2; i < 4; ++i) w[i] = rng.truncated_normal(sd, bound);
  }
  return w;
}

void model_jacobians(const ModelSpec& model, Mat& A, Mat& B) {
  const int n = model.state_dim();
  const int m = model.control_dim();
  A = Mat::Identity(n, n);
  B = Mat::Zero(n, m);
  if (model.kind == ModelKind::kSingleIntegrator) {
    B = model.dt * Mat::Identity(n, m);
  } else {
    A.topRightCorner(2, 2) = model.dt * Mat::Identity(2, 2);
    B.bottomRows(2) = model.dt * Mat::Identity(2, 2);
  }
}

RolloutPairResult rollout_pair(const ModelSpec& model, const State& x0,
                               const State& x0_nominal,
                               const ControlSequence& controls,
                               const ControlSequence& noise,
                               const FeedbackPolicy& feedback,
                               const std::vector<Vec>& disturbance) {
  const size_t T = controls.size();
  require(noise.size() == T && disturbance.size() == T,
          "rollout_pair: sequence lengths");

  RolloutPairResult out;
  out.real.reserve(T + 1);
  out.nominal.reserve(T + 1);
  out.feedback.reserve(T);
  out.real.push_back(x0);
  out.nominal.push_back(x0_nominal);

  State x = x0;
  State xn = x0_nominal;
  for (size_t k = 0; k < T; ++k) {
    const Control k_fb = feedback(static_cast<int>(k), x, xn);
    const Control u_real = clamp_control(model, controls[k] + noise[k] + k_fb);
    const Control u_nom = clamp_control(model, controls[k] + noise[k]);
    x = step(model, x, u_real, disturbance[k]);
    xn = step(model, xn, u_nom);
    out.real.push_back(x);
    out.nominal.push_back(xn);
    out.feedback.push_back(k_fb);
  }
  return out;
}

}  // namespace safempc
