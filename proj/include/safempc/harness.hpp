#pragma once

#include <stdexcept>
#include <string>

#include "safempc/cbf_filter.hpp"
#include "safempc/sampler.hpp"

namespace safempc {

struct FieldSpec {
  int n_obstacles = 30;
  double r_min = 1.0;
  double r_max = 3.0;
  double arena_min = 0.0;
  double arena_max = 50.0;
  double clearance = 2.0;    // start/goal margin beyond each radius
  double passage_min = 3.0;  // guaranteed corridor width
  int max_attempts = 200000;
};

class GenerationFailed : public std::runtime_error {
public:
  GenerationFailed()
      : std::runtime_error("obstacle placement exhausted its attempts") {}
};

/// Rejection-samples a cluttered field: centers uniform in the arena,
/// radii uniform in [r_min, r_max], every obstacle keeping `clearance`
/// off start and goal and leaving a corridor of width >= passage_min
/// along a randomized start-waypoint-goal polyline. Deterministic given
/// the seed.
ObstacleField generate_field(uint64_t seed, const FieldSpec& spec,
                             const Vec& start, const Vec& goal);

enum class ControllerId { kBasMppi, kSaRmppi, kBasIlqg, kAlIlqg, kCbfFilter };

std::string controller_name(ControllerId id);
ControllerId parse_controller(const std::string& name);

/// Everything one closed-loop experiment needs. reference nonempty
/// switches to tracking mode: plan-following controllers track it for
/// its full length and episodes never terminate early. With an empty
/// reference the task is navigation to cost.goal.
struct Scenario {
  std::string name = "navigation";
  ModelSpec model;
  BarrierSpec barrier;
  CostSpec cost;
  SamplerSpec sampler;
  SaRmppiOptions sa_opts;
  ALOptions al_opts;
  CBFSpec cbf;
  ObstacleField field;
  Vec start = Vec::Zero(2);
  Trajectory reference;
  double control_noise_std = 0.0;  // i.i.d. noise on the commanded control
  double reach_radius = 1.0;       // m
  /// Episode length for the sampling controllers; 0 means four times
  /// the nominal plan's steps-to-goal. Episodes run the full length
  /// (crashes excepted) and reach is judged at the final state.
  int max_steps = 0;
};

struct StepLog {
  int k = 0;
  Vec x;
  Vec v_realized;
  Vec u;
  Vec k_fb;
  double min_h = 0.0;
  double beta = 0.0;
  double S_nom_min = std::numeric_limits<double>::quiet_NaN();
  FreeEnergyReport fe;
  bool fe_valid = false;
  // gate activity (robust controller only): which branch propagated the
  // nominal state, and the free-energy-vs-threshold pair that decided it
  int branch = -1;
  double f_hat = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double ess = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  uint64_t seed = 0;
  ControllerId controller = ControllerId::kBasMppi;
  bool safe = true;
  bool reached = false;
  double final_goal_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<StepLog> steps;  // visited states; last row has nan controls
  double wall_time_s = 0.0;
  std::string error;  // nonempty when the trial aborted
};

/// Independent seeded closed-loop trials (seed, seed+1, ...), run
/// concurrently, output ordered by seed. Per-trial failures are
/// recorded in the RunRecord, not thrown.
std::vector<RunRecord> run_monte_carlo(const Scenario& sc, ControllerId id,
                                       int n_trials, uint64_t base_seed);

struct Summary {
  std::string controller;
  double sigma2 = 0.0;
  int trials = 0;
  double safety_pct = 0.0;
  double reach_pct = 0.0;
  double rmse_m = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> vel_mean;  // per-step mean of ||v_realized||
  std::vector<double> vel_std;
};

/// safety % over all runs; reach % over all runs; RMSE of the final
/// goal error over runs that were both safe and reached (nan if none);
/// per-step speed statistics across runs.
Summary metrics(const std::vector<RunRecord>& records,
                const std::string& controller, double sigma2);

/// Runs one plan-following controller against the scenario's unsafe
/// reference under i.i.d. control noise and summarizes it.
Summary tracking_comparison(const Scenario& sc, ControllerId id, int n_mc,
                            double control_noise_std, uint64_t base_seed);

}  // namespace safempc
