#include "safempc/harness.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>

#include "safempc/rng.hpp"

namespace safempc {

namespace {

double point_segment_dist(const Vec& p, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double polyline_dist(const Vec& p, const std::vector<Vec>& poly) {
  double d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < poly.size(); ++i)
    d = std::min(d, point_segment_dist(p, poly[i], poly[i + 1]));
  return d;
}

}  // namespace

ObstacleField generate_field(uint64_t seed, const FieldSpec& fs,
                             const Vec& start, const Vec& goal) {
  require(fs.clearance > 0.0, "generate_field: clearance > 0");
  require(fs.n_obstacles >= 0, "generate_field: n_obstacles >= 0");
  require(fs.r_min > 0.0 && fs.r_max >= fs.r_min, "generate_field: radii");
  require(fs.arena_max > fs.arena_min, "generate_field: arena bounds");
  require(fs.passage_min >= 0.0, "generate_field: passage_min >= 0");

  RngStream rng(stream_key(seed, 0xF1E1D));
  const double w = fs.arena_max - fs.arena_min;
  Vec mid(2);
  mid << fs.arena_min + rng.uniform(0.35, 0.65) * w,
      fs.arena_min + rng.uniform(0.35, 0.65) * w;
  const std::vector<Vec> corridor = {start.head(2), mid, goal.head(2)};

  std::vector<Obstacle> obs;
  obs.reserve(fs.n_obstacles);
  int attempts = 0;
  while (static_cast<int>(obs.size()) < fs.n_obstacles) {
    if (++attempts > fs.max_attempts) throw GenerationFailed();
    Obstacle o;
    o.cx = rng.uniform(fs.arena_min, fs.arena_max);
    o.cy = rng.uniform(fs.arena_min, fs.arena_max);
    o.r = rng.uniform(fs.r_min, fs.r_max);
    Vec c(2);
    c << o.cx, o.cy;
    if ((c - start.head(2)).norm() < o.r + fs.clearance) continue;
    if ((c - goal.head(2)).norm() < o.r + fs.clearance) continue;
    if (polyline_dist(c, corridor) < o.r + 0.5 * fs.passage_min) continue;
    obs.push_back(o);
  }
  return ObstacleField(std::move(obs));
}

std::string controller_name(ControllerId id) {
  switch (id) {
    case ControllerId::kBasMppi:
      return "bas_mppi";
    case ControllerId::kSaRmppi:
      return "sa_rmppi";
    case ControllerId::kBasIlqg:
      return "bas_ilqg";
    case ControllerId::kAlIlqg:
      return "al_ilqg";
    case ControllerId::kCbfFilter:
      return "cbf_filter";
  }
  throw ContractViolation("controller_name: unknown id");
}

ControllerId parse_controller(const std::string& name) {
  if (name == "bas_mppi") return ControllerId::kBasMppi;
  if (name == "sa_rmppi") return ControllerId::kSaRmppi;
  if (name == "bas_ilqg") return ControllerId::kBasIlqg;
  if (name == "al_ilqg") return ControllerId::kAlIlqg;
  if (name == "cbf_filter") return ControllerId::kCbfFilter;
  throw ContractViolation("parse_controller: unknown controller");
}

namespace {

constexpr uint64_t kDisturbTag = 0xD157;
constexpr uint64_t kCtrlNoiseTag = 0xC7A1;

int straight_line_steps(const ModelSpec& model, const Vec& start,
                        const Vec& goal) {
  const Vec d = (goal.head(2) - start.head(2)).cwiseAbs();
  double steps = 1.0;
  for (int i = 0; i < 2; ++i) {
    const double lim = std::max(std::abs(model.u_min[i]), model.u_max[i]);
    if (d[i] > 0.0 && lim > 0.0)
      steps = std::max(steps, d[i] / (model.dt * lim));
  }
  return static_cast<int>(std::ceil(steps));
}

ControlSequence straight_line_plan(const ModelSpec& model, const Vec& start,
                                   const Vec& goal, int T) {
  const Vec v = (goal.head(2) - start.head(2)) / (T * model.dt);
  return ControlSequence(T, clamp_control(model, v));
}

ControlSequence reference_plan(const ModelSpec& model,
                               const Trajectory& reference) {
  ControlSequence U;
  U.reserve(reference.size() - 1);
  for (size_t k = 0; k + 1 < reference.size(); ++k)
    U.push_back(clamp_control(
        model, (reference[k + 1].head(2) - reference[k].head(2)) / model.dt));
  return U;
}

/// Steps the converged plan from start takes to first enter the reach
/// radius; falls back to the straight-line time when the plan never
/// arrives.
int nominal_steps_to_goal(const EmbeddedModel& em, const CostEvaluator& cost,
                          const Scenario& sc) {
  const int sl = straight_line_steps(em.model(), sc.start, cost.ref(-1));
  const int H = 2 * sl;
  const TrackingCost tc(&cost, sc.sa_opts.trajopt.control_weight *
                                   Mat::Identity(em.control_dim(),
                                                 em.control_dim()));
  TrajOptSolution sol;
  try {
    sol = ilqg_solve(em, tc, em.augment_capped(sc.start),
                     straight_line_plan(em.model(), sc.start, cost.ref(-1), H),
                     sc.sa_opts.trajopt);
  } catch (const RegularizationExhausted&) {
    return sl;
  }
  for (size_t k = 0; k < sol.X.size(); ++k) {
    if ((sol.X[k].head(2) - cost.ref(-1)).norm() < sc.reach_radius)
      return std::max(1, static_cast<int>(k));
  }
  return sl;
}

struct PlanArtifacts {
  std::unique_ptr<EmbeddedModel> em_plain;
  std::unique_ptr<CostEvaluator> cost_plain;
  TrajOptSolution sol;
  FeedbackPolicy K;
  bool filter = false;  // run the per-step safety filter
};

std::unique_ptr<PlanArtifacts> build_plans(const Scenario& sc,
                                           const EmbeddedModel& em,
                                           const CostEvaluator& cost,
                                           ControllerId id) {
  auto art = std::make_unique<PlanArtifacts>();
  const ModelSpec& model = sc.model;
  const int m = model.control_dim();
  const Mat Ru = sc.sa_opts.trajopt.control_weight * Mat::Identity(m, m);
  const bool tracking = !sc.reference.empty();
  const int H = tracking ? static_cast<int>(sc.reference.size()) - 1
                         : 2 * straight_line_steps(model, sc.start,
                                                   cost.ref(-1));
  const ControlSequence U0 =
      tracking ? reference_plan(model, sc.reference)
               : straight_line_plan(model, sc.start, cost.ref(-1), H);

  if (id == ControllerId::kBasIlqg) {
    const TrackingCost tc(&cost, Ru);
    art->sol = ilqg_solve(em, tc, em.augment_capped(sc.start), U0,
                          sc.sa_opts.trajopt);
    art->K = feedback_policy(em, art->sol, sc.sa_opts.feedback_on_beta);
    return art;
  }

  // plain dynamics (no barrier state): empty field in vector mode
  BarrierSpec plain = sc.barrier;
  plain.aggregation = BarrierAggregation::kVector;
  art->em_plain =
      std::make_unique<EmbeddedModel>(model, ObstacleField{}, plain);
  art->cost_plain = std::make_unique<CostEvaluator>(
      sc.cost, art->em_plain->phys_dim(), 0, nullptr);

  if (id == ControllerId::kAlIlqg) {
    const ALResult al =
        al_outer_loop(*art->em_plain, *art->cost_plain, sc.field, sc.start,
                      U0, sc.sa_opts.trajopt, sc.al_opts);
    art->sol = al.sol;
  } else {
    const TrackingCost tc(art->cost_plain.get(), Ru);
    art->sol = ilqg_solve(*art->em_plain, tc, sc.start, U0,
                          sc.sa_opts.trajopt);
    art->filter = true;
  }
  art->K = feedback_policy(*art->em_plain, art->sol, false);
  return art;
}

StepLog visit(const Scenario& sc, const Vec& x) {
  StepLog row;
  row.x = x;
  row.min_h = sc.field.min_h(x);
  row.beta = barrier_state_capped(sc.barrier, sc.field, x.head(2)).sum();
  const int m = sc.model.control_dim();
  row.v_realized = Vec::Constant(2, std::numeric_limits<double>::quiet_NaN());
  row.u = Vec::Constant(m, std::numeric_limits<double>::quiet_NaN());
  row.k_fb = Vec::Constant(m, std::numeric_limits<double>::quiet_NaN());
  return row;
}

RunRecord run_sampling_trial(const Scenario& sc, const EmbeddedModel& em,
                             const CostEvaluator& cost, ControllerId id,
                             uint64_t seed, int max_steps) {
  RunRecord rec;
  rec.seed = seed;
  rec.controller = id;
  const ModelSpec& model = em.model();
  RngStream rngw(stream_key(seed, kDisturbTag));
  State x = sc.start;
  ControlSequence U(sc.sampler.T, Vec::Zero(model.control_dim()));
  SaRmppiState st;
  if (id == ControllerId::kSaRmppi) st = sa_rmppi_init(em, sc.sampler, x);
  const Vec goal = cost.ref(-1);

  // fixed-duration episode: reach is judged at the end, so the final
  // error measures how tightly the controller settles on the goal
  for (int k = 0;; ++k) {
    StepLog row = visit(sc, x);
    row.k = k;
    if (row.min_h <= 0.0) {
      rec.safe = false;
      rec.steps.push_back(std::move(row));
      break;
    }
    if (k >= max_steps) {
      rec.steps.push_back(std::move(row));
      break;
    }

    Control u;
    if (id == ControllerId::kBasMppi) {
      const auto res = bas_mppi_step(em, cost, sc.sampler,
                                     em.augment_capped(x), U, seed, k);
      u = clamp_control(model, res.U[0]);
      U = res.U_next;
      row.S_nom_min = res.diag.s_min;
      row.ess = res.diag.ess;
      row.k_fb = Vec::Zero(model.control_dim());
    } else {
      const auto res =
          sa_rmppi_step(em, cost, sc.sampler, sc.sa_opts, x, st, seed, k);
      u = res.u_exec;
      row.S_nom_min = res.diag.s_min;
      row.k_fb = res.k_fb_exec;
      row.fe = res.fe;
      row.fe_valid = true;
      row.branch = res.diag.nominal_branch;
      row.f_hat = res.diag.f_hat;
      row.alpha = res.alpha;
      row.ess = res.diag.ess;
    }
    const Vec w = sample_disturbance(model, rngw);
    const State xn = step(model, x, u, w);
    row.u = u;
    row.v_realized = (xn.head(2) - x.head(2)) / model.dt;
    rec.steps.push_back(std::move(row));
    x = xn;
  }
  rec.final_goal_error = (x.head(2) - goal).norm();
  rec.reached = rec.final_goal_error < sc.reach_radius;
  return rec;
}

RunRecord run_plan_trial(const Scenario& sc, const CostEvaluator& cost,
                         const PlanArtifacts& art, ControllerId id,
                         uint64_t seed) {
  RunRecord rec;
  rec.seed = seed;
  rec.controller = id;
  const ModelSpec& model = sc.model;
  const int H = static_cast<int>(art.sol.U.size());
  RngStream rngw(stream_key(seed, kDisturbTag));
  RngStream rngc(stream_key(seed, kCtrlNoiseTag));
  State x = sc.start;
  const Vec goal = cost.ref(-1);

  for (int k = 0; k < H; ++k) {
    StepLog row = visit(sc, x);
    row.k = k;
    if (row.min_h <= 0.0) rec.safe = false;

    const Vec xn_plan = art.sol.X[k].head(model.state_dim());
    const Control k_fb = art.K(k, x, xn_plan);
    Control u_nom = clamp_control(model, art.sol.U[k] + k_fb);
    if (art.filter)
      u_nom = cbf_filter(sc.cbf, model, sc.field, x, u_nom).u;
    Control u = u_nom;
    if (sc.control_noise_std > 0.0) {
      Vec eps(model.control_dim());
      for (int i = 0; i < eps.size(); ++i)
        eps[i] = sc.control_noise_std * rngc.normal();
      u = clamp_control(model, u_nom + eps);
    }
    const Vec w = sample_disturbance(model, rngw);
    const State xn = step(model, x, u, w);
    row.u = u;
    row.k_fb = k_fb;
    row.v_realized = (xn.head(2) - x.head(2)) / model.dt;
    rec.steps.push_back(std::move(row));
    x = xn;
  }
  StepLog last = visit(sc, x);
  last.k = H;
  if (last.min_h <= 0.0) rec.safe = false;
  rec.steps.push_back(std::move(last));
  rec.final_goal_error = (x.head(2) - goal).norm();
  rec.reached = rec.final_goal_error < sc.reach_radius;
  return rec;
}

}  // namespace

std::vector<RunRecord> run_monte_carlo(const Scenario& sc, ControllerId id,
                                       int n_trials, uint64_t base_seed) {
  require(n_trials >= 1, "run_monte_carlo: n_trials >= 1");
  EmbeddedModel em(sc.model, sc.field, sc.barrier);
  CostEvaluator cost(sc.cost, em.phys_dim(), em.beta_dim(), &em.field());
  require(sc.field.interior(sc.start), "run_monte_carlo: start must be safe");
  require(sc.field.interior(cost.ref(-1)),
          "run_monte_carlo: goal must be safe");

  const bool sampling =
      id == ControllerId::kBasMppi || id == ControllerId::kSaRmppi;
  int max_steps = 0;
  std::unique_ptr<PlanArtifacts> plans;
  if (sampling) {
    if (!sc.reference.empty())
      max_steps = static_cast<int>(sc.reference.size()) - 1;
    else
      max_steps = sc.max_steps > 0 ? sc.max_steps
                                   : 4 * nominal_steps_to_goal(em, cost, sc);
  } else {
    plans = build_plans(sc, em, cost, id);
  }

  std::vector<RunRecord> out(n_trials);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n_trials; ++i) {
    const uint64_t seed = base_seed + static_cast<uint64_t>(i);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out[i] = sampling
                   ? run_sampling_trial(sc, em, cost, id, seed, max_steps)
                   : run_plan_trial(sc, cost, *plans, id, seed);
    } catch (const std::exception& e) {
      out[i] = RunRecord{};
      out[i].seed = seed;
      out[i].controller = id;
      out[i].safe = false;
      out[i].error = e.what();
    }
    out[i].wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  return out;
}

Summary metrics(const std::vector<RunRecord>& records,
                const std::string& controller, double sigma2) {
  require(!records.empty(), "metrics: empty batch");
  Summary s;
  s.controller = controller;
  s.sigma2 = sigma2;
  s.trials = static_cast<int>(records.size());
  int nsafe = 0, nreach = 0, nrmse = 0;
  double sq = 0.0;
  size_t max_len = 0;
  for (const RunRecord& r : records) {
    nsafe += r.safe ? 1 : 0;
    nreach += r.reached ? 1 : 0;
    if (r.safe && r.reached) {
      sq += r.final_goal_error * r.final_goal_error;
      ++nrmse;
    }
    max_len = std::max(max_len, r.steps.size());
  }
  s.safety_pct = 100.0 * nsafe / s.trials;
  s.reach_pct = 100.0 * nreach / s.trials;
  if (nrmse > 0) s.rmse_m = std::sqrt(sq / nrmse);

  for (size_t k = 0; k < max_len; ++k) {
    double sum = 0.0, sum2 = 0.0;
    int n = 0;
    for (const RunRecord& r : records) {
      if (k >= r.steps.size()) continue;
      const Vec& v = r.steps[k].v_realized;
      if (v.size() == 0 || !std::isfinite(v[0])) continue;
      const double speed = v.norm();
      sum += speed;
      sum2 += speed * speed;
      ++n;
    }
    if (n == 0) break;
    const double mean = sum / n;
    s.vel_mean.push_back(mean);
    s.vel_std.push_back(std::sqrt(std::max(0.0, sum2 / n - mean * mean)));
  }
  return s;
}

Summary tracking_comparison(const Scenario& sc, ControllerId id, int n_mc,
                            double control_noise_std, uint64_t base_seed) {
  require(!sc.reference.empty(),
          "tracking_comparison: reference trajectory required");
  Scenario noisy = sc;
  noisy.control_noise_std = control_noise_std;
  const auto records = run_monte_carlo(noisy, id, n_mc, base_seed);
  return metrics(records, controller_name(id),
                 control_noise_std * control_noise_std);
}

}  // namespace safempc
