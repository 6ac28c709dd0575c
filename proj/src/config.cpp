#include "safempc/config.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace safempc {

using nlohmann::json;

namespace {

/// Pulls cfg[key] into out if present, erasing it so leftovers can be
/// reported as unknown keys.
template <typename T>
void take(json& section, const char* key, T& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  out = it->template get<T>();
  section.erase(it);
}

void take(json& section, const char* key, Vec& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  const auto v = it->get<std::vector<double>>();
  out = Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size()));
  section.erase(it);
}

void take(json& section, const char* key, Obstacle& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  const auto v = it->get<std::vector<double>>();
  require(v.size() == 3, "config: obstacle needs [cx, cy, r]");
  out = Obstacle{v[0], v[1], v[2]};
  section.erase(it);
}

json take_section(json& root, const char* name) {
  const auto it = root.find(name);
  if (it == root.end()) return json::object();
  json section = std::move(*it);
  require(section.is_object(), "config: section must be an object");
  root.erase(it);
  return section;
}

void reject_leftovers(const json& section, const char* name) {
  if (section.empty()) return;
  throw ContractViolation(std::string("config: unknown key '") +
                          section.begin().key() + "' in section '" + name +
                          "'");
}

BarrierKind parse_barrier_kind(const std::string& s) {
  if (s == "inverse") return BarrierKind::kInverse;
  if (s == "log_shifted") return BarrierKind::kLogShifted;
  if (s == "exponential") return BarrierKind::kExponential;
  throw ContractViolation("config: unknown barrier kind '" + s + "'");
}

BarrierAggregation parse_aggregation(const std::string& s) {
  if (s == "single_summed") return BarrierAggregation::kSingleSummed;
  if (s == "vector") return BarrierAggregation::kVector;
  throw ContractViolation("config: unknown barrier aggregation '" + s + "'");
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.start << 2.0, 2.0;
  cfg.goal << 48.0, 48.0;
  return cfg;
}

RunConfig default_tracking_config() {
  RunConfig cfg;
  cfg.task = "tracking";
  cfg.u_limit = 15.0;
  cfg.goal << 10.0, 0.0;
  cfg.q_pos = 4.0;
  cfg.phi_pos = 200.0;
  cfg.control_noise_std = 10.0;
  cfg.controller = "bas_ilqg";
  cfg.trials = 500;
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractViolation(std::string("config: ") + e.what());
  }
  require(root.is_object(), "config: top level must be an object");

  RunConfig cfg = default_config();

  json model = take_section(root, "model");
  take(model, "kind", cfg.model_kind);
  take(model, "dt", cfg.dt);
  take(model, "u_limit", cfg.u_limit);
  take(model, "sigma2", cfg.sigma2);
  take(model, "disturbance_bound", cfg.disturbance_bound);
  reject_leftovers(model, "model");

  json barrier = take_section(root, "barrier");
  take(barrier, "kind", cfg.barrier_kind);
  take(barrier, "aggregation", cfg.barrier_aggregation);
  take(barrier, "epsilon_h", cfg.epsilon_h);
  take(barrier, "gamma", cfg.gamma);
  take(barrier, "value_cap", cfg.value_cap);
  reject_leftovers(barrier, "barrier");

  json cost = take_section(root, "cost");
  take(cost, "q_pos", cfg.q_pos);
  take(cost, "q_beta", cfg.q_beta);
  take(cost, "phi_pos", cfg.phi_pos);
  take(cost, "crash_cost", cfg.crash_cost);
  reject_leftovers(cost, "cost");

  json trajopt = take_section(root, "trajopt");
  take(trajopt, "max_iters", cfg.trajopt.max_iters);
  take(trajopt, "tol", cfg.trajopt.tol);
  take(trajopt, "control_weight", cfg.trajopt.control_weight);
  take(trajopt, "gain_clip", cfg.trajopt.gain_clip);
  take(trajopt, "al_max_outer", cfg.al.max_outer);
  take(trajopt, "al_mu_init", cfg.al.mu_init);
  take(trajopt, "al_mu_growth", cfg.al.mu_growth);
  take(trajopt, "al_viol_tol", cfg.al.viol_tol);
  take(trajopt, "cbf_alpha_gain", cfg.cbf.alpha_gain);
  reject_leftovers(trajopt, "trajopt");

  json sampler = take_section(root, "sampler");
  take(sampler, "n_samples", cfg.n_samples);
  take(sampler, "horizon", cfg.horizon);
  take(sampler, "lambda", cfg.lambda);
  take(sampler, "explore_std", cfg.explore_std);
  take(sampler, "alpha_thresh", cfg.alpha_thresh);
  take(sampler, "beta_mix", cfg.beta_mix);
  take(sampler, "resolve_iters", cfg.resolve_iters);
  take(sampler, "alpha_auto_scale", cfg.alpha_auto_scale);
  take(sampler, "n_probe", cfg.n_probe);
  take(sampler, "n_boot", cfg.n_boot);
  take(sampler, "fixed_R", cfg.fixed_R);
  take(sampler, "feedback_on_beta", cfg.feedback_on_beta);
  reject_leftovers(sampler, "sampler");

  json scenario = take_section(root, "scenario");
  take(scenario, "task", cfg.task);
  take(scenario, "start", cfg.start);
  take(scenario, "goal", cfg.goal);
  take(scenario, "field_seed", cfg.field_seed);
  take(scenario, "n_obstacles", cfg.field.n_obstacles);
  take(scenario, "r_min", cfg.field.r_min);
  take(scenario, "r_max", cfg.field.r_max);
  take(scenario, "arena_min", cfg.field.arena_min);
  take(scenario, "arena_max", cfg.field.arena_max);
  take(scenario, "clearance", cfg.field.clearance);
  take(scenario, "passage_min", cfg.field.passage_min);
  take(scenario, "reach_radius", cfg.reach_radius);
  take(scenario, "max_steps", cfg.max_steps);
  take(scenario, "control_noise_std", cfg.control_noise_std);
  take(scenario, "track_speed", cfg.track_speed);
  take(scenario, "track_obstacle", cfg.track_obstacle);
  reject_leftovers(scenario, "scenario");

  json run = take_section(root, "run");
  take(run, "controller", cfg.controller);
  take(run, "trials", cfg.trials);
  take(run, "seed", cfg.seed);
  take(run, "out_dir", cfg.out_dir);
  reject_leftovers(run, "run");

  if (!root.empty())
    throw ContractViolation("config: unknown section '" +
                            root.begin().key() + "'");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ContractViolation("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  json root;
  root["model"] = {{"kind", cfg.model_kind},
                   {"dt", cfg.dt},
                   {"u_limit", cfg.u_limit},
                   {"sigma2", cfg.sigma2},
                   {"disturbance_bound", cfg.disturbance_bound}};
  root["barrier"] = {{"kind", cfg.barrier_kind},
                     {"aggregation", cfg.barrier_aggregation},
                     {"epsilon_h", cfg.epsilon_h},
                     {"gamma", cfg.gamma},
                     {"value_cap", cfg.value_cap}};
  root["cost"] = {{"q_pos", cfg.q_pos},
                  {"q_beta", cfg.q_beta},
                  {"phi_pos", cfg.phi_pos},
                  {"crash_cost", cfg.crash_cost}};
  root["trajopt"] = {{"max_iters", cfg.trajopt.max_iters},
                     {"tol", cfg.trajopt.tol},
                     {"control_weight", cfg.trajopt.control_weight},
                     {"gain_clip", cfg.trajopt.gain_clip},
                     {"al_max_outer", cfg.al.max_outer},
                     {"al_mu_init", cfg.al.mu_init},
                     {"al_mu_growth", cfg.al.mu_growth},
                     {"al_viol_tol", cfg.al.viol_tol},
                     {"cbf_alpha_gain", cfg.cbf.alpha_gain}};
  root["sampler"] = {{"n_samples", cfg.n_samples},
                     {"horizon", cfg.horizon},
                     {"lambda", cfg.lambda},
                     {"explore_std", cfg.explore_std},
                     {"alpha_thresh", cfg.alpha_thresh},
                     {"beta_mix", cfg.beta_mix},
                     {"resolve_iters", cfg.resolve_iters},
                     {"alpha_auto_scale", cfg.alpha_auto_scale},
                     {"n_probe", cfg.n_probe},
                     {"n_boot", cfg.n_boot},
                     {"fixed_R", cfg.fixed_R},
                     {"feedback_on_beta", cfg.feedback_on_beta}};
  root["scenario"] = {
      {"task", cfg.task},
      {"start", std::vector<double>(cfg.start.data(),
                                    cfg.start.data() + cfg.start.size())},
      {"goal", std::vector<double>(cfg.goal.data(),
                                   cfg.goal.data() + cfg.goal.size())},
      {"field_seed", cfg.field_seed},
      {"n_obstacles", cfg.field.n_obstacles},
      {"r_min", cfg.field.r_min},
      {"r_max", cfg.field.r_max},
      {"arena_min", cfg.field.arena_min},
      {"arena_max", cfg.field.arena_max},
      {"clearance", cfg.field.clearance},
      {"passage_min", cfg.field.passage_min},
      {"reach_radius", cfg.reach_radius},
      {"max_steps", cfg.max_steps},
      {"control_noise_std", cfg.control_noise_std},
      {"track_speed", cfg.track_speed},
      {"track_obstacle",
       std::vector<double>{cfg.track_obstacle.cx, cfg.track_obstacle.cy,
                           cfg.track_obstacle.r}}};
  root["run"] = {{"controller", cfg.controller},
                 {"trials", cfg.trials},
                 {"seed", cfg.seed},
                 {"out_dir", cfg.out_dir}};
  return root.dump(2) + "\n";
}

Scenario build_scenario(const RunConfig& cfg) {
  require(cfg.dt > 0.0, "config: dt > 0");
  require(cfg.u_limit > 0.0, "config: u_limit > 0");
  require(cfg.explore_std > 0.0, "config: explore_std > 0");
  require(cfg.lambda > 0.0, "config: lambda > 0");

  Scenario sc;
  sc.name = cfg.task;
  if (cfg.model_kind == "single_integrator")
    sc.model = make_single_integrator(cfg.dt, cfg.u_limit);
  else if (cfg.model_kind == "double_integrator")
    sc.model = make_double_integrator(cfg.dt, cfg.u_limit);
  else
    throw ContractViolation("config: unknown model kind '" + cfg.model_kind +
                            "'");
  sc.model.disturbance.sigma2 = cfg.sigma2;
  sc.model.disturbance.bound = cfg.disturbance_bound;

  sc.barrier.kind = parse_barrier_kind(cfg.barrier_kind);
  sc.barrier.aggregation = parse_aggregation(cfg.barrier_aggregation);
  sc.barrier.epsilon_h = cfg.epsilon_h;
  sc.barrier.gamma = cfg.gamma;
  sc.barrier.value_cap = cfg.value_cap;

  const int m = sc.model.control_dim();
  sc.cost.goal = cfg.goal;
  sc.cost.Q = cfg.q_pos * Mat::Identity(2, 2);
  sc.cost.q_beta = cfg.q_beta;
  sc.cost.phi_weight = cfg.phi_pos * Mat::Identity(2, 2);
  sc.cost.crash_cost = cfg.crash_cost;
  sc.cost.lambda = cfg.lambda;
  sc.cost.Sigma = cfg.explore_std * cfg.explore_std * Mat::Identity(m, m);

  sc.sampler.N = cfg.n_samples;
  sc.sampler.T = cfg.horizon;
  sc.sampler.lambda = cfg.lambda;
  sc.sampler.Sigma = sc.cost.Sigma;
  sc.sampler.alpha_thresh = cfg.alpha_thresh;
  sc.sampler.beta_mix = cfg.beta_mix;

  sc.sa_opts.trajopt = cfg.trajopt;
  sc.sa_opts.resolve_iters = cfg.resolve_iters;
  sc.sa_opts.alpha_auto_scale = cfg.alpha_auto_scale;
  sc.sa_opts.n_probe = cfg.n_probe;
  sc.sa_opts.n_boot = cfg.n_boot;
  sc.sa_opts.fixed_R = cfg.fixed_R;
  sc.sa_opts.feedback_on_beta = cfg.feedback_on_beta;
  sc.al_opts = cfg.al;
  sc.cbf = cfg.cbf;

  sc.start = cfg.start;
  sc.reach_radius = cfg.reach_radius;
  sc.max_steps = cfg.max_steps;
  sc.control_noise_std = cfg.control_noise_std;

  if (cfg.task == "navigation") {
    sc.field = generate_field(cfg.field_seed, cfg.field, cfg.start, cfg.goal);
  } else if (cfg.task == "tracking") {
    require(cfg.track_speed > 0.0, "config: track_speed > 0");
    sc.field = ObstacleField({cfg.track_obstacle});
    const Vec line = cfg.goal - cfg.start;
    const double length = line.norm();
    require(length > 0.0, "config: tracking needs distinct start and goal");
    const int H =
        std::max(1, static_cast<int>(std::ceil(length / (cfg.track_speed *
                                                         cfg.dt))));
    for (int k = 0; k <= H; ++k)
      sc.reference.push_back(cfg.start + (static_cast<double>(k) / H) * line);
    sc.cost.reference = sc.reference;
  } else {
    throw ContractViolation("config: unknown task '" + cfg.task + "'");
  }
  return sc;
}

}  // namespace safempc
