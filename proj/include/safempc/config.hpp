#pragma once

#include <string>

#include "safempc/harness.hpp"

namespace safempc {

/// Everything an experiment reads, in file form. Scalar weights expand
/// to the isotropic matrices the components consume; one lambda and one
/// exploration scale feed both the cost and the sampler.
struct RunConfig {
  // model
  std::string model_kind = "single_integrator";
  double dt = 0.1;
  double u_limit = 5.0;
  double sigma2 = 0.0;
  double disturbance_bound = 0.0;

  // barrier
  std::string barrier_kind = "inverse";
  std::string barrier_aggregation = "single_summed";
  double epsilon_h = 1e-6;
  double gamma = 1.0;
  double value_cap = 1e12;

  // cost
  double q_pos = 2.0;
  double q_beta = 50.0;
  double phi_pos = 100.0;
  double crash_cost = 1e6;

  // trajopt (inner solver, the AL outer loop, and the CBF filter)
  TrajOptOptions trajopt;
  ALOptions al;
  CBFSpec cbf;

  // sampler
  int n_samples = 128;
  int horizon = 25;
  double lambda = 0.3;
  double explore_std = 1.0;
  double alpha_thresh = 0.0;  // <= 0: auto from the safe plan cost
  double beta_mix = 0.0;
  int resolve_iters = 5;
  double alpha_auto_scale = 2.0;
  int n_probe = 100;
  int n_boot = 200;
  double fixed_R = 0.0;
  bool feedback_on_beta = true;

  // scenario
  std::string task = "navigation";  // or "tracking"
  Vec start = Vec::Zero(2);
  Vec goal = Vec::Zero(2);
  uint64_t field_seed = 1;
  FieldSpec field;
  double reach_radius = 1.0;
  int max_steps = 0;
  double control_noise_std = 0.0;
  double track_speed = 2.0;         // reference speed along +x, tracking task
  Obstacle track_obstacle{5.0, 0.0, 1.5};

  // run
  std::string controller = "sa_rmppi";
  int trials = 100;
  uint64_t seed = 0;
  std::string out_dir = "out";
};

/// Navigation defaults: the cluttered-arena experiment.
RunConfig default_config();

/// Tracking defaults: follow an unsafe straight reference past one
/// obstacle under control noise.
RunConfig default_tracking_config();

/// Parses a JSON config; absent keys keep their defaults, unknown keys
/// are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string dump_config(const RunConfig& cfg);

/// Materializes the scenario: generates the obstacle field
/// (navigation) or the straight reference and its single obstacle
/// (tracking).
Scenario build_scenario(const RunConfig& cfg);

}  // namespace safempc
