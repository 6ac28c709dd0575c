#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "safempc/cost.hpp"

namespace safempc {

/// Per-MPC-step free-energy accounting: Monte Carlo estimates from the
/// sampled cost batches, the estimator uncertainty, and both forms of
/// the growth bound (the proof form (alpha - F) + 2 E_M_V +
/// (L_phi + (T-1) L_q) R, and the stated form with the extra D_F
/// factor on the Lipschitz term).
struct FreeEnergyReport {
  double F_real = 0.0;
  double F_nominal = 0.0;
  double E_M_V = 0.0;
  double R = 0.0;
  double L_q = 0.0;
  double L_phi = 0.0;
  double D_F = 0.0;
  double bound_proof_form = 0.0;
  double bound_stated_form = 0.0;
  double delta_F_observed = 0.0;
  bool satisfied_proof = true;
  bool satisfied_stated = true;
};

/// -lambda log( (1/N) sum exp(-S_n / lambda) ), computed around the
/// batch minimum so the exponentials never overflow.
double free_energy_mc(const std::vector<double>& costs, double lambda);

/// Half-width of the central 99% bootstrap interval of free_energy_mc.
/// Deterministic given the seed.
double estimate_E_M_V(const std::vector<double>& costs, double lambda,
                      int n_boot, uint64_t seed);

/// Both growth-bound forms. T is the horizon length (T steps of running
/// cost); the proof form ignores D_F.
std::pair<double, double> lemma1_bound(double F_nominal, double alpha_thresh,
                                       double E_M_V, double L_q, double L_phi,
                                       double R, int T, double D_F);

/// Assembles the per-step report from the real and nominal cost batches.
/// prev_F_real is the previous step's F_real, or NaN on the first step
/// (growth is then zero by convention and both flags hold).
FreeEnergyReport femonitor_report(const std::vector<double>& real_costs,
                                  const std::vector<double>& nominal_costs,
                                  double lambda, double alpha_thresh,
                                  const LipschitzEstimate& lip, double R,
                                  int T, double D_F, int n_boot,
                                  uint64_t seed, double prev_F_real);

}  // namespace safempc
