#pragma once

#include <string>
#include <vector>

#include "safempc/harness.hpp"

namespace safempc {

/// Shortest decimal form that round-trips through from_chars.
std::string format_double(double v);

void write_summary_csv(const std::string& path,
                       const std::vector<Summary>& rows);

/// Per-step trace: k, x0, x1, v0, v1, u0, u1, kfb0, kfb1, min_h, beta,
/// S_nom_min, F_real, F_nominal, E_M_V, R, L_q, L_phi, bound_proof,
/// bound_stated, bound_ok. Steps without a free-energy report carry nan
/// in those columns; the terminal row carries nan controls.
void write_trace_csv(const std::string& path, const RunRecord& rec);

void write_field_csv(const std::string& path, const ObstacleField& field);

/// Per-step velocity statistics across a batch of runs: k, v_mean, v_std.
void write_velocity_csv(const std::string& path, const Summary& s);

/// Parses a CSV with a header row into doubles; cells that are not
/// numeric (including "nan") come back as nan.
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header);

}  // namespace safempc
