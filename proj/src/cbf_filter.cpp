#include "safempc/cbf_filter.hpp"

#include <cmath>
#include <vector>

namespace safempc {

namespace {

struct Halfspace {  // a^T u >= b
  Eigen::Vector2d a;
  double b;
};

bool feasible_point(const std::vector<Halfspace>& cons,
                    const Eigen::Vector2d& u, double tol) {
  for (const Halfspace& c : cons)
    if (c.a.dot(u) < c.b - tol) return false;
  return true;
}

/// Least-violating control inside the box: projected gradient descent on
/// the summed squared constraint violations.
Eigen::Vector2d least_violating(const std::vector<Halfspace>& cons,
                                const Eigen::Vector2d& lo,
                                const Eigen::Vector2d& hi,
                                Eigen::Vector2d u) {
  double lip = 0.0;
  for (const Halfspace& c : cons) lip += 2.0 * c.a.squaredNorm();
  if (lip <= 0.0) return u;
  const double step = 1.0 / lip;
  for (int it = 0; it < 500; ++it) {
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    for (const Halfspace& c : cons) {
      const double v = c.b - c.a.dot(u);
      if (v > 0.0) grad -= 2.0 * v * c.a;
    }
    u = (u - step * grad).cwiseMax(lo).cwiseMin(hi);
    if (grad.norm() * step < 1e-12) break;
  }
  return u;
}

}  // namespace

FilterResult cbf_filter(const CBFSpec& spec, const ModelSpec& model,
                        const ObstacleField& field, const State& x,
                        const Control& u_nom) {
  require(spec.alpha_gain > 0.0 && spec.alpha_gain <= 1.0,
          "cbf_filter: alpha_gain in (0, 1]");
  require(model.kind == ModelKind::kSingleIntegrator,
          "cbf_filter: single-integrator models only");
  require(u_nom.size() == 2, "cbf_filter: control dim");

  const Eigen::Vector2d lo = model.u_min, hi = model.u_max;
  const Eigen::Vector2d un = u_nom;

  // Decay constraints 2 dt (p - c_i)^T u >= -alpha h_i(x), plus the box
  // faces so the candidate enumeration below covers clipped optima.
  std::vector<Halfspace> decay;
  decay.reserve(field.count());
  for (int i = 0; i < field.count(); ++i)
    decay.push_back({model.dt * field.h_grad(x, i),
                     -spec.alpha_gain * field.h(x, i)});

  std::vector<Halfspace> all = decay;
  all.push_back({{1, 0}, lo.x()});
  all.push_back({{0, 1}, lo.y()});
  all.push_back({{-1, 0}, -hi.x()});
  all.push_back({{0, -1}, -hi.y()});

  double scale = 1.0;
  for (const Halfspace& c : all)
    scale = std::max({scale, c.a.norm(), std::abs(c.b)});
  const double tol = 1e-9 * scale;

  FilterResult out;
  if (feasible_point(all, un, tol)) {
    out.u = u_nom;
    return out;
  }

  // The optimum of this 2-D projection QP is u_nom itself, the
  // projection onto one active constraint line, or the vertex of two.
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_u = Eigen::Vector2d::Zero();
  bool found = false;
  auto consider = [&](const Eigen::Vector2d& u) {
    if (!feasible_point(all, u, tol)) return;
    const double d = (u - un).squaredNorm();
    if (d < best) {
      best = d;
      best_u = u;
      found = true;
    }
  };

  const int n = static_cast<int>(all.size());
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = all[i].a;
    const double nrm2 = a.squaredNorm();
    if (nrm2 <= 0.0) continue;
    consider(un + (all[i].b - a.dot(un)) / nrm2 * a);
    for (int j = i + 1; j < n; ++j) {
      Mat A(2, 2);
      A.row(0) = all[i].a.transpose();
      A.row(1) = all[j].a.transpose();
      const double det = A.determinant();
      if (std::abs(det) < 1e-12 * scale * scale) continue;
      Vec b(2);
      b << all[i].b, all[j].b;
      consider(A.inverse() * b);
    }
  }

  if (found) {
    out.u = best_u.cwiseMax(lo).cwiseMin(hi);
    return out;
  }
  out.feasible = false;
  out.u = least_violating(decay, lo, hi, un.cwiseMax(lo).cwiseMin(hi));
  return out;
}

}  // namespace safempc
