#include "safempc/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "safempc/rng.hpp"

namespace safempc {

namespace {

struct NoiseModel {
  Mat L;     // Cholesky factor of Sigma
  Mat Sinv;  // Sigma^{-1}
};

NoiseModel make_noise_model(const SamplerSpec& spec, int m) {
  require(spec.N >= 1, "sampler: N >= 1");
  require(spec.T >= 1, "sampler: T >= 1");
  require(spec.lambda > 0.0, "sampler: lambda > 0");
  require(spec.beta_mix >= 0.0 && spec.beta_mix < 1.0,
          "sampler: beta_mix in [0,1)");
  require(spec.Sigma.rows() == m && spec.Sigma.cols() == m,
          "sampler: Sigma must be m x m");
  Eigen::LLT<Mat> llt(spec.Sigma);
  require(llt.info() == Eigen::Success, "sampler: Sigma must be PD");
  NoiseModel nm;
  nm.L = llt.matrixL();
  nm.Sinv = llt.solve(Mat::Identity(m, m));
  return nm;
}

ControlSequence draw_noise(RngStream& rng, const NoiseModel& nm, int T,
                           int m) {
  ControlSequence E(T);
  Vec z(m);
  for (int k = 0; k < T; ++k) {
    for (int j = 0; j < m; ++j) z[j] = rng.normal();
    E[k] = nm.L * z;
  }
  return E;
}

StepDiagnostics make_diag(const std::vector<double>& costs,
                          const std::vector<double>& weights,
                          const std::vector<uint8_t>& crash) {
  StepDiagnostics d;
  const int n = static_cast<int>(costs.size());
  d.s_min = costs[0];
  d.s_max = costs[0];
  double sum = 0.0, wsq = 0.0, wmax = -1.0;
  int ncrash = 0;
  for (int i = 0; i < n; ++i) {
    d.s_min = std::min(d.s_min, costs[i]);
    d.s_max = std::max(d.s_max, costs[i]);
    sum += costs[i];
    wsq += weights[i] * weights[i];
    if (weights[i] > wmax) {
      wmax = weights[i];
      d.argmax_sample = i;
    }
    ncrash += crash[i] ? 1 : 0;
  }
  d.s_mean = sum / n;
  d.ess = 1.0 / wsq;
  d.crash_fraction = static_cast<double>(ncrash) / n;
  return d;
}

ControlSequence clamp_plan(const ModelSpec& model, ControlSequence U) {
  for (Vec& u : U) u = clamp_control(model, u);
  return U;
}

double percentile95(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t idx = static_cast<size_t>(
      std::ceil(0.95 * static_cast<double>(v.size() - 1)));
  return v[idx];
}

}  // namespace

std::vector<double> mppi_weights(const std::vector<double>& costs,
                                 double lambda) {
  require(!costs.empty(), "mppi_weights: empty batch");
  require(lambda > 0.0, "mppi_weights: lambda > 0");
  const double mn = *std::min_element(costs.begin(), costs.end());
  require(std::isfinite(mn), "mppi_weights: costs must be finite");
  std::vector<double> w(costs.size());
  double Z = 0.0;
  for (size_t i = 0; i < costs.size(); ++i) {
    w[i] = std::exp(-(costs[i] - mn) / lambda);
    Z += w[i];
  }
  for (double& wi : w) wi /= Z;
  return w;
}

ControlSequence mppi_update(const ControlSequence& U,
                            const std::vector<ControlSequence>& E,
                            const std::vector<double>& weights) {
  require(E.size() == weights.size() && !E.empty(),
          "mppi_update: batch sizes");
  ControlSequence out = U;
  for (size_t k = 0; k < U.size(); ++k) {
    Vec acc = Vec::Zero(U[k].size());
    for (size_t n = 0; n < E.size(); ++n) {
      require(E[n].size() == U.size(), "mppi_update: noise length");
      acc += weights[n] * E[n][k];
    }
    out[k] += acc;
  }
  return out;
}

ControlSequence shift_plan(const ControlSequence& U) {
  require(!U.empty(), "shift_plan: empty plan");
  ControlSequence out(U.begin() + 1, U.end());
  out.push_back(U.back());
  return out;
}

MppiStepResult bas_mppi_step(const EmbeddedModel& em, const CostEvaluator& cost,
                             const SamplerSpec& spec, const Vec& xb0,
                             const ControlSequence& U, uint64_t run_seed,
                             int mpc_step) {
  require(static_cast<int>(U.size()) == spec.T, "bas_mppi_step: |U| == T");
  require(xb0.size() == em.dim(), "bas_mppi_step: state dimension");
  const int m = em.control_dim();
  const NoiseModel nm = make_noise_model(spec, m);
  const double cap = em.barrier().value_cap;

  std::vector<ControlSequence> E(spec.N);
  std::vector<double> S(spec.N, 0.0);
  std::vector<uint8_t> crash(spec.N, 0);

#pragma omp parallel for schedule(static)
  for (int n = 0; n < spec.N; ++n) {
    RngStream rng(stream_key(run_seed, static_cast<uint64_t>(mpc_step),
                             static_cast<uint64_t>(n)));
    E[n] = draw_noise(rng, nm, spec.T, m);
    Vec xb = xb0;
    Vec xb_next(em.dim());
    double s = 0.0;
    bool dead = false;
    bool exited = false;
    for (int k = 0; k < spec.T; ++k) {
      const Control u = clamp_control(em.model(), U[k] + E[n][k]);
      double mh = 0.0;
      if (!em.step_fused(xb, u, xb_next, mh)) {
        dead = true;
        break;
      }
      xb.swap(xb_next);
      if (mh <= 0.0) {
        exited = true;
        break;
      }
      s += cost.smooth_running(xb, k + 1);
      s += 0.5 * spec.lambda *
           (U[k].dot(nm.Sinv * U[k]) + 2.0 * U[k].dot(nm.Sinv * E[n][k]));
    }
    if (dead || exited) {
      crash[n] = 1;
      S[n] = cap;
    } else {
      S[n] = s + cost.smooth_terminal(xb);
    }
  }

  const std::vector<double> w = mppi_weights(S, spec.lambda);

  MppiStepResult res;
  res.diag = make_diag(S, w, crash);
  res.diag.all_crashed =
      std::all_of(S.begin(), S.end(), [&](double s) { return s >= cap; });
  if (res.diag.all_crashed) {
    res.U = U;
  } else {
    res.U = clamp_plan(em.model(), mppi_update(U, E, w));
  }
  res.U_next = shift_plan(res.U);
  return res;
}

namespace {

/// The importance sampler proper, on augmented states. Each sample rolls
/// the feedback-corrected system and the noise-only nominal system side
/// by side through the embedded dynamics, pricing the correction into
/// S_hat/S_real and leaving S (nominal) untouched by feedback.
RolloutBatch sais_aug(const EmbeddedModel& em, const CostEvaluator& cost,
                      const SamplerSpec& spec, const AugFeedbackPolicy& K_safe,
                      const Vec& xb0, const Vec& xb0_nominal,
                      const ControlSequence& U, uint64_t run_seed,
                      int mpc_step) {
  const ModelSpec& model = em.model();
  require(static_cast<int>(U.size()) == spec.T, "sais: |U| == T");
  require(xb0.size() == em.dim() && xb0_nominal.size() == em.dim(),
          "sais: state dimension");
  require(std::isfinite(spec.alpha_thresh),
          "sais: alpha_thresh must be resolved");
  const int m = model.control_dim();
  const int np = em.phys_dim();
  const NoiseModel nm = make_noise_model(spec, m);
  const double cap = em.barrier().value_cap;
  const double crash_cost = cost.spec().crash_cost;
  const double fb_w = 0.5 * spec.lambda * (1.0 - spec.beta_mix);

  RolloutBatch b;
  b.E.resize(spec.N);
  b.S.assign(spec.N, 0.0);
  b.S_hat.assign(spec.N, 0.0);
  b.S_real.assign(spec.N, 0.0);
  b.S_nom.assign(spec.N, 0.0);
  b.crash.assign(spec.N, 0);
  b.max_dev.assign(spec.N, 0.0);

#pragma omp parallel for schedule(static)
  for (int n = 0; n < spec.N; ++n) {
    RngStream rng(stream_key(run_seed, static_cast<uint64_t>(mpc_step),
                             static_cast<uint64_t>(n)));
    b.E[n] = draw_noise(rng, nm, spec.T, m);
    Vec xb = xb0;
    Vec xbs = xb0_nominal;
    Vec xb_next(em.dim());
    Vec xbs_next(em.dim());
    double Sh = 0.0, Sn = 0.0, Sr = 0.0, dev = 0.0;
    double mh_r = 0.0, mh_n = 0.0;
    bool dead = false;
    bool fb_unsafe = false;
    for (int k = 0; k < spec.T; ++k) {
      const Control k_fb = K_safe(k, xb, xbs);
      const Control u_r = clamp_control(model, U[k] + b.E[n][k] + k_fb);
      const Control u_n = clamp_control(model, U[k] + b.E[n][k]);
      const bool ok_r = em.step_fused(xb, u_r, xb_next, mh_r);
      const bool ok_n = em.step_fused(xbs, u_n, xbs_next, mh_n);
      dev = std::max(dev, (xb_next.head(np) - xbs_next.head(np)).norm());
      if (!ok_r) fb_unsafe = true;
      if (!ok_r || !ok_n) {
        dead = true;
        break;
      }
      xb.swap(xb_next);
      xbs.swap(xbs_next);
      const bool unsafe_r = mh_r <= 0.0;
      const bool unsafe_n = mh_n <= 0.0;
      if (unsafe_r) fb_unsafe = true;
      double qr = cost.smooth_running(xb, k + 1);
      if (unsafe_r) qr += crash_cost;
      double qn = cost.smooth_running(xbs, k + 1);
      if (unsafe_n) qn += crash_cost;
      Sh += qr + fb_w * k_fb.dot(nm.Sinv * k_fb);
      Sn += qn;
      Sr += qr +
            fb_w * (U[k] + k_fb).dot(nm.Sinv * (U[k] + 2.0 * b.E[n][k] + k_fb));
    }
    b.max_dev[n] = dev;
    if (dead || fb_unsafe) {
      b.crash[n] = fb_unsafe ? 1 : 0;
      b.S[n] = b.S_hat[n] = b.S_real[n] = b.S_nom[n] = cap;
      continue;
    }
    double phi_r = cost.smooth_terminal(xb);
    if (mh_r <= 0.0) phi_r += crash_cost;
    double phi_n = cost.smooth_terminal(xbs);
    if (mh_n <= 0.0) phi_n += crash_cost;
    Sh += phi_r;
    Sr += phi_r;
    Sn += phi_n;
    double Snom =
        0.5 * Sn + 0.5 * std::max(std::min(Sh, spec.alpha_thresh), Sn);
    for (int k = 0; k < spec.T; ++k) {
      Snom += 0.5 * spec.lambda *
              (U[k].dot(nm.Sinv * U[k]) + 2.0 * U[k].dot(nm.Sinv * b.E[n][k]));
    }
    b.S[n] = Sn;
    b.S_hat[n] = Sh;
    b.S_real[n] = Sr;
    b.S_nom[n] = Snom;
  }
  return b;
}

}  // namespace

RolloutBatch sais(const EmbeddedModel& em, const CostEvaluator& cost,
                  const SamplerSpec& spec, const FeedbackPolicy& K_safe,
                  const State& x0, const State& x0_nominal,
                  const ControlSequence& U, uint64_t run_seed, int mpc_step) {
  require(x0.size() == em.phys_dim() && x0_nominal.size() == em.phys_dim(),
          "sais: state dimension");
  const int np = em.phys_dim();
  const AugFeedbackPolicy K_aug = [&K_safe, np](int k, const Vec& xb,
                                                const Vec& xbs) -> Control {
    return K_safe(k, xb.head(np), xbs.head(np));
  };
  return sais_aug(em, cost, spec, K_aug, em.augment_capped(x0),
                  em.augment_capped(x0_nominal), U, run_seed, mpc_step);
}

SaRmppiState sa_rmppi_init(const EmbeddedModel& em, const SamplerSpec& spec,
                           const State& x0) {
  require(x0.size() == em.phys_dim(), "sa_rmppi_init: state dimension");
  SaRmppiState st;
  st.x_nom = x0;
  st.U.assign(spec.T, Vec::Zero(em.control_dim()));
  return st;
}

SaRmppiStepResult sa_rmppi_step(const EmbeddedModel& em,
                                const CostEvaluator& cost,
                                const SamplerSpec& spec,
                                const SaRmppiOptions& opts,
                                const State& x_real, SaRmppiState& st,
                                uint64_t run_seed, int mpc_step) {
  const ModelSpec& model = em.model();
  require(x_real.size() == model.state_dim(), "sa_rmppi_step: state dimension");
  require(static_cast<int>(st.U.size()) == spec.T, "sa_rmppi_step: |U| == T");
  const int m = model.control_dim();

  // Safe plan about the nominal state: cold solve on the first step,
  // warm re-solve on a small iteration budget afterwards. A failed
  // re-solve falls back to the previous plan's gains.
  const TrackingCost plan_cost(&cost,
                               opts.trajopt.control_weight *
                                   Mat::Identity(m, m));
  TrajOptOptions topt = opts.trajopt;
  const Vec xb_nom = em.augment_capped(st.x_nom);
  if (!st.has_plan) {
    st.safe_plan = ilqg_solve(em, plan_cost, xb_nom, st.U, topt);
    st.has_plan = true;
  } else {
    topt.max_iters = opts.resolve_iters;
    try {
      st.safe_plan =
          ilqg_solve(em, plan_cost, xb_nom, shift_plan(st.safe_plan.U), topt);
    } catch (const RegularizationExhausted&) {
    }
  }

  const NoiseModel nm = make_noise_model(spec, m);
  double alpha = spec.alpha_thresh;
  if (alpha <= 0.0) {
    // An infeasible start leaves the plan with fewer states than the
    // horizon; the terminal cost of its last state (carrying the capped
    // barrier) then dominates and loosens the gate so the nominal can
    // re-anchor and recover.
    double pc = cost.terminal(st.safe_plan.X.back());
    const int k_max = std::min(
        spec.T, static_cast<int>(st.safe_plan.X.size()) - 1);
    for (int k = 1; k <= k_max; ++k) pc += cost.running(st.safe_plan.X[k], k);
    for (const Vec& u : st.safe_plan.U) pc += 0.5 * spec.lambda * u.dot(nm.Sinv * u);
    alpha = opts.alpha_auto_scale * pc;
  }

  SamplerSpec sspec = spec;
  sspec.alpha_thresh = alpha;
  const AugFeedbackPolicy K = feedback_policy_augmented(
      st.safe_plan, em.beta_dim(), opts.feedback_on_beta);
  const Vec xb_real = em.augment_capped(x_real);
  const RolloutBatch b =
      sais_aug(em, cost, sspec, K, xb_real, xb_nom, st.U, run_seed, mpc_step);

  const std::vector<double> w = mppi_weights(b.S_nom, spec.lambda);
  const double cap = em.barrier().value_cap;

  SaRmppiStepResult res;
  res.alpha = alpha;
  res.diag = make_diag(b.S_nom, w, b.crash);
  res.diag.all_crashed = std::all_of(b.S_nom.begin(), b.S_nom.end(),
                                     [&](double s) { return s >= cap; });
  ControlSequence U_new =
      res.diag.all_crashed ? st.U
                           : clamp_plan(model, mppi_update(st.U, b.E, w));

  res.R = opts.fixed_R > 0.0 ? opts.fixed_R
                             : std::max(1e-3, percentile95(b.max_dev));

  Trajectory nominal_phys;
  nominal_phys.reserve(st.safe_plan.X.size());
  for (const Vec& xb : st.safe_plan.X)
    nominal_phys.push_back(xb.head(em.phys_dim()));
  LipschitzEstimate lip;
  try {
    lip = estimate_local_lipschitz(cost, &em, nominal_phys, res.R,
                                   opts.n_probe,
                                   stream_key(run_seed, mpc_step, 1000001));
  } catch (const EmptyTube&) {
    lip.tube_intersects_unsafe = true;
  }

  res.diag.f_hat = free_energy_mc(b.S_hat, spec.lambda);

  res.k_fb_exec = K(0, xb_real, xb_nom);
  res.u_exec = clamp_control(model, U_new[0] + res.k_fb_exec);

  const DisturbanceSpec& dist = model.disturbance;
  const double D =
      dist.bound > 0.0 ? dist.bound : 3.0 * dist.stddev();
  const double D_F = (step(model, x_real, res.u_exec) - x_real).norm() +
                     (st.x_nom - x_real).norm() + D;

  res.fe = femonitor_report(b.S_real, b.S_nom, spec.lambda, alpha, lip, res.R,
                            spec.T, D_F, opts.n_boot,
                            stream_key(run_seed, mpc_step, 1000002),
                            st.prev_F_real);
  st.prev_F_real = res.fe.F_real;

  // Nominal-state propagation: when the sampled free energy clears the
  // acceptance threshold the nominal is re-anchored to the predicted
  // real state; otherwise it stays on its own safe plan, so the
  // feedback target remains a trusted trajectory rather than chasing a
  // state the sampler could not certify. A fully crashed batch means
  // the nominal offers no usable guidance either, and holding it would
  // lock the feedback onto an unreachable target; re-anchoring is the
  // only way back.
  if (res.diag.f_hat <= alpha || res.diag.all_crashed) {
    st.x_nom = step(model, x_real, clamp_control(model, U_new[0]));
    res.diag.nominal_branch = 1;
  } else {
    st.x_nom = step(model, st.x_nom, clamp_control(model, st.safe_plan.U[0]));
    res.diag.nominal_branch = 0;
  }
  st.U = shift_plan(U_new);
  return res;
}

}  // namespace safempc
