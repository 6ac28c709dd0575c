#include "safempc/csvio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace safempc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

double parse_cell(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc())
    return std::numeric_limits<double>::quiet_NaN();
  return v;
}

void put(std::ofstream& f, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) f << ',' << format_double(v[i]);
}

}  // namespace

void write_summary_csv(const std::string& path,
                       const std::vector<Summary>& rows) {
  auto f = open_out(path);
  f << "controller,sigma2,trials,safety_pct,reach_pct,rmse_m\n";
  for (const Summary& s : rows) {
    f << s.controller << ',' << format_double(s.sigma2) << ',' << s.trials
      << ',' << format_double(s.safety_pct) << ','
      << format_double(s.reach_pct) << ',' << format_double(s.rmse_m)
      << '\n';
  }
}

void write_trace_csv(const std::string& path, const RunRecord& rec) {
  require(!rec.steps.empty(), "write_trace_csv: empty record");
  auto f = open_out(path);
  const int n = static_cast<int>(rec.steps.front().x.size());
  const int m = static_cast<int>(rec.steps.front().u.size());
  f << 'k';
  for (int i = 0; i < n; ++i) f << ",x" << i;
  f << ",v0,v1";
  for (int i = 0; i < m; ++i) f << ",u" << i;
  for (int i = 0; i < m; ++i) f << ",kfb" << i;
  f << ",min_h,beta,S_nom_min,F_real,F_nominal,E_M_V,R,L_q,L_phi,"
       "bound_proof,bound_stated,bound_ok,branch,f_hat,alpha,ess\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const StepLog& s : rec.steps) {
    f << s.k;
    put(f, s.x);
    put(f, s.v_realized);
    put(f, s.u);
    put(f, s.k_fb);
    f << ',' << format_double(s.min_h) << ',' << format_double(s.beta)
      << ',' << format_double(s.S_nom_min);
    const FreeEnergyReport& fe = s.fe;
    const bool ok = s.fe_valid;
    for (double v : {ok ? fe.F_real : nan, ok ? fe.F_nominal : nan,
                     ok ? fe.E_M_V : nan, ok ? fe.R : nan, ok ? fe.L_q : nan,
                     ok ? fe.L_phi : nan, ok ? fe.bound_proof_form : nan,
                     ok ? fe.bound_stated_form : nan,
                     ok ? (fe.satisfied_proof ? 1.0 : 0.0) : nan})
      f << ',' << format_double(v);
    f << ',' << s.branch << ',' << format_double(s.f_hat) << ','
      << format_double(s.alpha) << ',' << format_double(s.ess);
    f << '\n';
  }
}

void write_field_csv(const std::string& path, const ObstacleField& field) {
  auto f = open_out(path);
  f << "cx,cy,r\n";
  for (const Obstacle& o : field.obstacles())
    f << format_double(o.cx) << ',' << format_double(o.cy) << ','
      << format_double(o.r) << '\n';
}

void write_velocity_csv(const std::string& path, const Summary& s) {
  auto f = open_out(path);
  f << "k,v_mean,v_std\n";
  for (size_t k = 0; k < s.vel_mean.size(); ++k)
    f << k << ',' << format_double(s.vel_mean[k]) << ','
      << format_double(s.vel_std[k]) << '\n';
}

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("empty csv: " + path);
  if (header) {
    header->clear();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header->push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(parse_cell(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace safempc
