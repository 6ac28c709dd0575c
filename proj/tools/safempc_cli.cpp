#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "safempc/config.hpp"
#include "safempc/csvio.hpp"

using namespace safempc;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string controller;
  double sigma2 = 0.0;
  int trials = 0;
  uint64_t seed = 0;
  std::string out;
  CLI::Option* o_controller = nullptr;
  CLI::Option* o_sigma2 = nullptr;
  CLI::Option* o_trials = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_out = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_controller,
                bool with_sigma2 = true) {
  cmd->add_option("--config", o.config_path, "config file (JSON)");
  if (with_controller)
    o.o_controller = cmd->add_option(
        "--controller", o.controller,
        "bas_mppi | sa_rmppi | bas_ilqg | al_ilqg | cbf_filter");
  if (with_sigma2)
    o.o_sigma2 = cmd->add_option("--sigma2", o.sigma2,
                                 "disturbance variance (m/s)^2");
  o.o_trials = cmd->add_option("--trials", o.trials, "Monte Carlo trials");
  o.o_seed = cmd->add_option("--seed", o.seed, "base seed");
  o.o_out = cmd->add_option("--out", o.out, "output directory");
}

RunConfig resolve(const CommonOpts& o, const RunConfig& fallback) {
  RunConfig cfg =
      o.config_path.empty() ? fallback : load_config(o.config_path);
  if (o.o_controller && o.o_controller->count()) cfg.controller = o.controller;
  if (o.o_sigma2 && o.o_sigma2->count()) cfg.sigma2 = o.sigma2;
  if (o.o_trials && o.o_trials->count()) cfg.trials = o.trials;
  if (o.o_seed && o.o_seed->count()) cfg.seed = o.seed;
  if (o.o_out && o.o_out->count()) cfg.out_dir = o.out;
  return cfg;
}

void print_summary(const Summary& s) {
  std::printf("%-12s sigma2=%-7g trials=%-4d safety=%6.2f%%  reach=%6.2f%%  "
              "rmse=%g m\n",
              s.controller.c_str(), s.sigma2, s.trials, s.safety_pct,
              s.reach_pct, s.rmse_m);
}

/// One experiment cell: runs, writes traces + velocity stats into dir,
/// returns the summary row.
Summary run_cell(const Scenario& sc, ControllerId id, int trials,
                 uint64_t seed, double sigma2, const fs::path& dir,
                 int max_traces) {
  fs::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_monte_carlo(sc, id, trials, seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  int written = 0;
  for (const RunRecord& r : records) {
    if (!r.error.empty()) continue;
    if (written++ >= max_traces) break;
    write_trace_csv((dir / ("trace_" + std::to_string(r.seed) + ".csv"))
                        .string(),
                    r);
  }
  int errors = 0;
  for (const RunRecord& r : records) errors += r.error.empty() ? 0 : 1;
  if (errors > 0)
    std::fprintf(stderr, "warning: %d/%zu trials errored (first: %s)\n",
                 errors, records.size(),
                 std::find_if(records.begin(), records.end(),
                              [](const RunRecord& r) {
                                return !r.error.empty();
                              })
                     ->error.c_str());
  Summary s = metrics(records, controller_name(id), sigma2);
  write_velocity_csv((dir / "velocity.csv").string(), s);
  std::printf("[%6.1fs] ", secs);
  print_summary(s);
  std::fflush(stdout);
  return s;
}

int cmd_run(const CommonOpts& o) {
  const RunConfig cfg = resolve(o, default_config());
  const Scenario sc = build_scenario(cfg);
  const ControllerId id = parse_controller(cfg.controller);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_field_csv((dir / "field.csv").string(), sc.field);
  const Summary s = run_cell(sc, id, cfg.trials, cfg.seed, cfg.sigma2, dir,
                             cfg.trials);
  write_summary_csv((dir / "summary.csv").string(), {s});
  return 0;
}

int cmd_sweep(const CommonOpts& o, const std::vector<double>& sigma2s,
              const std::vector<std::string>& controllers, int traces) {
  const RunConfig base = resolve(o, default_config());
  const fs::path dir(base.out_dir);
  fs::create_directories(dir);
  std::vector<Summary> rows;
  bool wrote_field = false;
  for (const std::string& name : controllers) {
    const ControllerId id = parse_controller(name);
    for (double s2 : sigma2s) {
      RunConfig cfg = base;
      cfg.sigma2 = s2;
      const Scenario sc = build_scenario(cfg);
      if (!wrote_field) {
        write_field_csv((dir / "field.csv").string(), sc.field);
        wrote_field = true;
      }
      char cell[64];
      std::snprintf(cell, sizeof(cell), "%s_sigma2_%g", name.c_str(), s2);
      rows.push_back(run_cell(sc, id, cfg.trials, cfg.seed, s2, dir / cell,
                              traces));
      write_summary_csv((dir / "summary.csv").string(), rows);
    }
  }
  return 0;
}

int cmd_compare_tracking(const CommonOpts& o, double noise_std, int traces) {
  RunConfig cfg = resolve(o, default_tracking_config());
  cfg.task = "tracking";
  if (!(o.o_sigma2 && o.o_sigma2->count())) cfg.sigma2 = 0.0;
  const Scenario sc = build_scenario(cfg);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_field_csv((dir / "field.csv").string(), sc.field);

  std::vector<Summary> rows;
  for (ControllerId id : {ControllerId::kBasIlqg, ControllerId::kAlIlqg,
                          ControllerId::kCbfFilter}) {
    Scenario noisy = sc;
    noisy.control_noise_std = noise_std;
    rows.push_back(run_cell(noisy, id, cfg.trials, cfg.seed,
                            noise_std * noise_std,
                            dir / controller_name(id), traces));
    write_summary_csv((dir / "summary.csv").string(), rows);
  }
  return 0;
}

int cmd_field(const CommonOpts& o, uint64_t seed) {
  RunConfig cfg = resolve(o, default_config());
  cfg.field_seed = seed;
  const Scenario sc = build_scenario(cfg);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_field_csv((dir / "field.csv").string(), sc.field);
  std::ofstream f(dir / "scenario.json");
  f << dump_config(cfg);
  std::printf("%d obstacles -> %s and %s\n", sc.field.count(),
              (dir / "field.csv").c_str(), (dir / "scenario.json").c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety-embedded sampling MPC experiments"};
  app.require_subcommand(0, 1);
  bool print_default = false;
  app.add_flag("--print-default-config", print_default,
               "emit the canonical config file and exit");

  CommonOpts run_o, sweep_o, track_o, field_o;
  CLI::App* run = app.add_subcommand("run", "one controller, one cell");
  add_common(run, run_o, true);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "controllers x disturbance levels; writes summary.csv");
  add_common(sweep, sweep_o, false, /*with_sigma2=*/false);
  std::vector<double> sigma2s = {0.0, 5.0, 10.0, 50.0, 100.0};
  sweep->add_option("--sigma2", sigma2s, "disturbance variances")
      ->delimiter(',');
  std::vector<std::string> controllers = {"bas_mppi", "sa_rmppi"};
  sweep->add_option("--controllers", controllers, "controllers to sweep")
      ->delimiter(',');
  int sweep_traces = 10;
  sweep->add_option("--traces-per-cell", sweep_traces,
                    "trace files kept per cell");

  CLI::App* track = app.add_subcommand(
      "compare-tracking", "plan followers on an unsafe reference");
  add_common(track, track_o, false);
  double noise_std = 10.0;
  track->add_option("--noise-std", noise_std, "control noise std");
  int track_traces = 10;
  track->add_option("--traces-per-cell", track_traces,
                    "trace files kept per controller");

  CLI::App* field = app.add_subcommand("field", "generate an obstacle field");
  field->add_option("--config", field_o.config_path, "config file (JSON)");
  field_o.o_out = field->add_option("--out", field_o.out, "output directory");
  uint64_t field_seed = 1;
  field->add_option("--seed", field_seed, "field seed")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_default) {
      std::cout << dump_config(default_config());
      return 0;
    }
    if (run->parsed()) return cmd_run(run_o);
    if (sweep->parsed())
      return cmd_sweep(sweep_o, sigma2s, controllers, sweep_traces);
    if (track->parsed())
      return cmd_compare_tracking(track_o, noise_std, track_traces);
    if (field->parsed()) return cmd_field(field_o, field_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::cout << app.help();
  return 0;
}
