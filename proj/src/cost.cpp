#include "safempc/cost.hpp"

#include <cmath>

#include "safempc/rng.hpp"

namespace safempc {

namespace {

void check_weight(const Mat& W, const char* what) {
  require(W.rows() == 2 && W.cols() == 2, "CostSpec: weights are 2x2");
  require(W.isApprox(W.transpose(), 1e-10), what);
  Eigen::SelfAdjointEigenSolver<Mat> es(W);
  require(es.eigenvalues().minCoeff() > -1e-10, what);
}

}  // namespace

CostEvaluator::CostEvaluator(CostSpec spec, int phys_dim, int beta_dim,
                             const ObstacleField* field)
    : spec_(std::move(spec)),
      phys_dim_(phys_dim),
      beta_dim_(beta_dim),
      field_(field) {
  require(phys_dim_ >= 2 && beta_dim_ >= 0, "CostEvaluator: dims");
  require(spec_.goal.size() == 2, "CostSpec: goal is a position");
  check_weight(spec_.Q, "CostSpec: Q must be symmetric PSD");
  check_weight(spec_.phi_weight, "CostSpec: phi_weight must be symmetric PSD");
  require(spec_.q_beta >= 0.0, "CostSpec: q_beta >= 0");
  require(spec_.crash_cost >= 0.0, "CostSpec: crash_cost >= 0");
  require(spec_.lambda > 0.0, "CostSpec: lambda > 0");
  require(spec_.Sigma.rows() == 2 && spec_.Sigma.cols() == 2,
          "CostSpec: Sigma is 2x2");
  require(Eigen::LLT<Mat>(spec_.Sigma).info() == Eigen::Success,
          "CostSpec: Sigma must be positive definite");
  for (const Vec& r : spec_.reference)
    require(r.size() >= 2, "CostSpec: reference entries carry a position");
  Q2_ = spec_.Q;
  phi2_ = spec_.phi_weight;
}

const Vec& CostEvaluator::ref(int k) const {
  if (spec_.reference.empty()) return spec_.goal;
  if (k < 0) return spec_.reference.back();
  const int last = static_cast<int>(spec_.reference.size()) - 1;
  return spec_.reference[std::min(k, last)];
}

double CostEvaluator::quad(const Vec& xb, const Eigen::Matrix2d& W,
                           const Vec& r) const {
  const Eigen::Vector2d e = xb.head<2>() - r.head<2>();
  return e.dot(W * e);
}

double CostEvaluator::indicator(const Vec& xb) const {
  if (field_ && field_->min_h(xb) <= 0.0) return spec_.crash_cost;
  return 0.0;
}

double CostEvaluator::smooth_running(const Vec& xb, int k) const {
  double c = quad(xb, Q2_, ref(k));
  if (beta_dim_ > 0)
    c += spec_.q_beta * xb.segment(phys_dim_, beta_dim_).squaredNorm();
  return c;
}

double CostEvaluator::smooth_terminal(const Vec& xb) const {
  double c = quad(xb, phi2_, ref(-1));
  if (beta_dim_ > 0)
    c += spec_.q_beta * xb.segment(phys_dim_, beta_dim_).squaredNorm();
  return c;
}

double CostEvaluator::running(const Vec& xb, int k) const {
  return smooth_running(xb, k) + indicator(xb);
}

double CostEvaluator::terminal(const Vec& xb) const {
  return smooth_terminal(xb) + indicator(xb);
}

double CostEvaluator::cost_to_go(const Trajectory& traj) const {
  require(!traj.empty(), "cost_to_go: empty trajectory");
  const int T = static_cast<int>(traj.size()) - 1;
  double s = terminal(traj[T]);
  for (int k = 0; k < T; ++k) s += running(traj[k], k);
  return s;
}

void CostEvaluator::running_expansion(const Vec& xb, int k, Vec& qx,
                                      Mat& qxx) const {
  qx = Vec::Zero(dim());
  qxx = Mat::Zero(dim(), dim());
  const Eigen::Vector2d e = xb.head<2>() - ref(k).head<2>();
  qx.head<2>() = 2.0 * (spec_.Q * e);
  qxx.topLeftCorner<2, 2>() = 2.0 * spec_.Q;
  if (beta_dim_ > 0) {
    qx.segment(phys_dim_, beta_dim_) =
        2.0 * spec_.q_beta * xb.segment(phys_dim_, beta_dim_);
    qxx.block(phys_dim_, phys_dim_, beta_dim_, beta_dim_) =
        2.0 * spec_.q_beta * Mat::Identity(beta_dim_, beta_dim_);
  }
}

void CostEvaluator::terminal_expansion(const Vec& xb, Vec& px,
                                       Mat& pxx) const {
  px = Vec::Zero(dim());
  pxx = Mat::Zero(dim(), dim());
  const Eigen::Vector2d e = xb.head<2>() - ref(-1).head<2>();
  px.head<2>() = 2.0 * (spec_.phi_weight * e);
  pxx.topLeftCorner<2, 2>() = 2.0 * spec_.phi_weight;
  if (beta_dim_ > 0) {
    px.segment(phys_dim_, beta_dim_) =
        2.0 * spec_.q_beta * xb.segment(phys_dim_, beta_dim_);
    pxx.block(phys_dim_, phys_dim_, beta_dim_, beta_dim_) =
        2.0 * spec_.q_beta * Mat::Identity(beta_dim_, beta_dim_);
  }
}

namespace {

/// Position gradient of q_beta ||beta(p)||^2 at a safe probe point.
Eigen::Vector2d beta_cost_grad(const EmbeddedModel& em, double q_beta,
                               const Eigen::Vector2d& p) {
  const ObstacleField& field = em.field();
  const BarrierSpec& spec = em.barrier();
  const double px = p.x(), py = p.y();
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  if (spec.aggregation == BarrierAggregation::kSingleSummed) {
    double beta = 0.0;
    Eigen::Vector2d chain = Eigen::Vector2d::Zero();
    for (int i = 0; i < field.count(); ++i) {
      const double h = field.h_at(px, py, i);
      beta += barrier_eval(spec, h).value();
      chain += barrier_slope(spec, h) * field.h_grad_at(px, py, i);
    }
    g = 2.0 * q_beta * beta * chain;
  } else {
    for (int i = 0; i < field.count(); ++i) {
      const double h = field.h_at(px, py, i);
      g += 2.0 * q_beta * barrier_eval(spec, h).value() *
           barrier_slope(spec, h) * field.h_grad_at(px, py, i);
    }
  }
  return g;
}

}  // namespace

LipschitzEstimate estimate_local_lipschitz(const CostEvaluator& cost,
                                           const EmbeddedModel* em,
                                           const Trajectory& nominal,
                                           double R, int n_probe,
                                           uint64_t seed) {
  require(R > 0.0, "estimate_local_lipschitz: R > 0");
  require(n_probe >= 100, "estimate_local_lipschitz: n_probe >= 100");
  require(!nominal.empty(), "estimate_local_lipschitz: empty trajectory");

  const ObstacleField* field = em ? &em->field() : nullptr;
  const double floor = em ? em->barrier().epsilon_h : 0.0;
  const CostSpec& spec = cost.spec();

  LipschitzEstimate out;
  RngStream rng(seed);
  const int T = static_cast<int>(nominal.size()) - 1;
  int valid = 0;

  for (int k = 0; k <= T; ++k) {
    const Eigen::Vector2d center = nominal[k].head<2>();
    const bool terminal = k == T;
    const Eigen::Matrix2d W = terminal ? spec.phi_weight : spec.Q;
    const Eigen::Vector2d r = cost.ref(terminal ? -1 : k).head<2>();
    double& L = terminal ? out.L_phi : out.L_q;
    for (int j = 0; j < n_probe; ++j) {
      Eigen::Vector2d p = center;
      if (j > 0) {  // probe 0 anchors at the tube center
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        const double rad = R * std::sqrt(rng.uniform());
        p += rad * Eigen::Vector2d(std::cos(ang), std::sin(ang));
      }
      if (field) {
        const double mh = field->min_h_at(p.x(), p.y());
        if (mh <= 0.0) {
          out.tube_intersects_unsafe = true;
          continue;
        }
        if (mh <= floor) continue;  // blow-up region, gradient undefined
      }
      Eigen::Vector2d g = 2.0 * (W * (p - r));
      if (em && cost.beta_dim() > 0)
        g += beta_cost_grad(*em, spec.q_beta, p);
      L = std::max(L, g.norm());
      ++valid;
    }
  }
  if (valid == 0) throw EmptyTube();
  return out;
}

}  // namespace safempc
