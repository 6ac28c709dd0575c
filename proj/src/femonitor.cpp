#include "safempc/femonitor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safempc/rng.hpp"

namespace safempc {

double free_energy_mc(const std::vector<double>& costs, double lambda) {
  require(!costs.empty(), "free_energy_mc: empty batch");
  require(lambda > 0.0, "free_energy_mc: lambda > 0");
  const double m = *std::min_element(costs.begin(), costs.end());
  double acc = 0.0;
  for (const double s : costs) acc += std::exp(-(s - m) / lambda);
  return m - lambda * std::log(acc / static_cast<double>(costs.size()));
}

double estimate_E_M_V(const std::vector<double>& costs, double lambda,
                      int n_boot, uint64_t seed) {
  const int n = static_cast<int>(costs.size());
  require(n >= 10, "estimate_E_M_V: batch too small");
  require(n_boot >= 200, "estimate_E_M_V: n_boot >= 200");

  RngStream rng(seed);
  // The resample minimum cancels out of the free energy, so one
  // exponential table (shifted by the batch minimum) serves every
  // bootstrap draw.
  const double m = *std::min_element(costs.begin(), costs.end());
  std::vector<double> table(n);
  for (int i = 0; i < n; ++i) table[i] = std::exp(-(costs[i] - m) / lambda);
  std::vector<double> estimates(n_boot);
  for (int b = 0; b < n_boot; ++b) {
    double acc = 0.0;
    double mr = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>(rng.raw() % n);
      acc += table[j];
      if (costs[j] < mr) mr = costs[j];
    }
    // acc == 0 means every resampled entry underflowed the shared
    // table; the resample's own minimum is then the free energy.
    estimates[b] =
        acc > 0.0 ? m - lambda * std::log(acc / static_cast<double>(n)) : mr;
  }
  std::sort(estimates.begin(), estimates.end());
  const int lo = static_cast<int>(std::floor(0.005 * (n_boot - 1)));
  const int hi = static_cast<int>(std::ceil(0.995 * (n_boot - 1)));
  return 0.5 * (estimates[hi] - estimates[lo]);
}

std::pair<double, double> lemma1_bound(double F_nominal, double alpha_thresh,
                                       double E_M_V, double L_q, double L_phi,
                                       double R, int T, double D_F) {
  const double base = (alpha_thresh - F_nominal) + 2.0 * E_M_V;
  const double lipschitz = (L_phi + (T - 1) * L_q) * R;
  return {base + lipschitz, base + lipschitz * D_F};
}

FreeEnergyReport femonitor_report(const std::vector<double>& real_costs,
                                  const std::vector<double>& nominal_costs,
                                  double lambda, double alpha_thresh,
                                  const LipschitzEstimate& lip, double R,
                                  int T, double D_F, int n_boot,
                                  uint64_t seed, double prev_F_real) {
  FreeEnergyReport rep;
  rep.F_real = free_energy_mc(real_costs, lambda);
  rep.F_nominal = free_energy_mc(nominal_costs, lambda);
  rep.E_M_V = std::max(
      estimate_E_M_V(real_costs, lambda, n_boot, stream_key(seed, 1)),
      estimate_E_M_V(nominal_costs, lambda, n_boot, stream_key(seed, 2)));
  rep.R = R;
  rep.L_q = lip.L_q;
  rep.L_phi = lip.L_phi;
  rep.D_F = D_F;
  std::tie(rep.bound_proof_form, rep.bound_stated_form) = lemma1_bound(
      rep.F_nominal, alpha_thresh, rep.E_M_V, lip.L_q, lip.L_phi, R, T, D_F);
  if (std::isfinite(prev_F_real)) {
    rep.delta_F_observed = rep.F_real - prev_F_real;
    const double slack = 1e-9 * std::max(1.0, std::abs(rep.F_real));
    rep.satisfied_proof = rep.delta_F_observed <= rep.bound_proof_form + slack;
    rep.satisfied_stated =
        rep.delta_F_observed <= rep.bound_stated_form + slack;
  }
  return rep;
}

}  // namespace safempc
