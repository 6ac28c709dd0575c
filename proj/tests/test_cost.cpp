#include <doctest.h>

#include <cmath>

#include "safempc/cost.hpp"
#include "safempc/rng.hpp"

using namespace safempc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

CostSpec unit_spec() {
  CostSpec s;
  s.goal = v2(0, 0);
  s.Q = Mat::Identity(2, 2);
  s.phi_weight = Mat::Identity(2, 2);
  s.q_beta = 10.0;
  return s;
}

}  // namespace

TEST_CASE("running cost minimum and barrier weight") {
  CostEvaluator cost(unit_spec(), 2, 1, nullptr);
  CHECK(cost.running(v3(0, 0, 0), 0) == doctest::Approx(0.0));
  CHECK(cost.running(v3(0, 0, 1.0 / 3.0), 0) == doctest::Approx(10.0 / 9.0));
}

TEST_CASE("crash indicator fires inside an obstacle") {
  ObstacleField field({{5, 5, 1}});
  CostSpec s = unit_spec();
  CostEvaluator cost(s, 2, 1, &field);
  CHECK(cost.running(v3(5, 5, 0), 0) >= s.crash_cost);
  CHECK(cost.terminal(v3(5, 4.5, 0)) >= s.crash_cost);
  CHECK(cost.running(v3(8, 8, 0), 0) < 1e3);  // safe side, quadratic only
}

TEST_CASE("terminal cost examples") {
  CostEvaluator cost(unit_spec(), 2, 0, nullptr);
  CHECK(cost.terminal(v2(0, 0)) == doctest::Approx(0.0));
  CHECK(cost.terminal(v2(1, 0)) == doctest::Approx(1.0));
  CHECK(cost.terminal(v2(0.6, 0.8)) == doctest::Approx(1.0));
}

TEST_CASE("cost to go sums hand-built values") {
  CostEvaluator cost(unit_spec(), 2, 0, nullptr);
  Trajectory at_goal(5, v2(0, 0));
  CHECK(cost.cost_to_go(at_goal) == doctest::Approx(0.0));

  Trajectory traj = {v2(1, 0), v2(std::sqrt(2.0), 0), v2(std::sqrt(3.0), 0)};
  CHECK(cost.cost_to_go(traj) == doctest::Approx(6.0));
}

TEST_CASE("cost to go equals per-step re-evaluation") {
  ObstacleField field({{3, 3, 1}});
  CostSpec s = unit_spec();
  s.Q << 2, 0.5, 0.5, 1;
  s.goal = v2(4, -1);
  CostEvaluator cost(s, 2, 1, &field);

  RngStream rng(17);
  Trajectory traj;
  for (int k = 0; k < 12; ++k)
    traj.push_back(v3(rng.uniform(0, 6), rng.uniform(0, 6), rng.uniform(0, 2)));

  const int T = 11;
  double manual = cost.terminal(traj[T]);
  for (int k = 0; k < T; ++k) manual += cost.running(traj[k], k);
  CHECK(cost.cost_to_go(traj) == doctest::Approx(manual));
  CHECK(cost.cost_to_go(traj) >= 0.0);

  // adding a constant c to every running cost shifts the sum by T*c
  const double c = 3.7;
  double shifted = cost.terminal(traj[T]);
  for (int k = 0; k < T; ++k) shifted += cost.running(traj[k], k) + c;
  CHECK(shifted == doctest::Approx(cost.cost_to_go(traj) + T * c));
}

TEST_CASE("reference tracking switches the target per step") {
  CostSpec s = unit_spec();
  s.reference = {v2(1, 0), v2(2, 0), v2(3, 0)};
  CostEvaluator cost(s, 2, 0, nullptr);
  CHECK(cost.running(v2(1, 0), 0) == doctest::Approx(0.0));
  CHECK(cost.running(v2(1, 0), 1) == doctest::Approx(1.0));
  CHECK(cost.running(v2(3, 0), 7) == doctest::Approx(0.0));  // clamps to last
  CHECK(cost.terminal(v2(3, 0)) == doctest::Approx(0.0));
}

TEST_CASE("cost spec validation") {
  CostSpec bad = unit_spec();
  bad.Q << 1, 2, 2, 1;  // indefinite
  CHECK_THROWS_AS(CostEvaluator(bad, 2, 0, nullptr), ContractViolation);

  CostSpec neg = unit_spec();
  neg.lambda = 0.0;
  CHECK_THROWS_AS(CostEvaluator(neg, 2, 0, nullptr), ContractViolation);

  CostSpec sing = unit_spec();
  sing.Sigma = Mat::Zero(2, 2);
  CHECK_THROWS_AS(CostEvaluator(sing, 2, 0, nullptr), ContractViolation);
}

TEST_CASE("smooth expansions match finite differences") {
  ObstacleField field({{3, 3, 1}});
  CostSpec s = unit_spec();
  s.Q << 2, 0.5, 0.5, 1;
  s.phi_weight << 5, 1, 1, 4;
  s.goal = v2(1, 1);
  CostEvaluator cost(s, 4, 2, &field);

  RngStream rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Vec xb(6);
    for (int i = 0; i < 6; ++i) xb[i] = rng.uniform(-2, 2);
    Vec qx;
    Mat qxx;
    cost.running_expansion(xb, 3, qx, qxx);
    Vec px;
    Mat pxx;
    cost.terminal_expansion(xb, px, pxx);

    const double eps = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Vec xp = xb, xm = xb;
      xp[i] += eps;
      xm[i] -= eps;
      const double fd_run =
          (cost.smooth_running(xp, 3) - cost.smooth_running(xm, 3)) / (2 * eps);
      CHECK(qx[i] == doctest::Approx(fd_run).epsilon(1e-6));
      const double fd_term =
          (cost.smooth_terminal(xp) - cost.smooth_terminal(xm)) / (2 * eps);
      CHECK(px[i] == doctest::Approx(fd_term).epsilon(1e-6));
      for (int j = 0; j < 6; ++j) {
        Vec gp, gm;
        Mat dummy;
        cost.running_expansion(xp, 3, gp, dummy);
        cost.running_expansion(xm, 3, gm, dummy);
        CHECK(qxx(j, i) ==
              doctest::Approx((gp[j] - gm[j]) / (2 * eps)).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("lipschitz estimate matches the quadratic supremum") {
  CostSpec s = unit_spec();
  s.q_beta = 0.0;
  CostEvaluator cost(s, 2, 0, nullptr);
  const Trajectory nominal = {v2(3, 0), v2(3, 0)};
  const auto est = estimate_local_lipschitz(cost, nullptr, nominal, 1.0,
                                            10000, 99);
  // sup of ||2x|| over the ball around (3,0) with radius 1 is 8
  CHECK(est.L_q == doctest::Approx(8.0).epsilon(0.05));
  CHECK(est.L_phi == doctest::Approx(8.0).epsilon(0.05));
  CHECK(!est.tube_intersects_unsafe);
}

TEST_CASE("zero cost gives zero constants") {
  CostSpec s;
  s.Q = Mat::Zero(2, 2);
  s.phi_weight = Mat::Zero(2, 2);
  s.q_beta = 0.0;
  CostEvaluator cost(s, 2, 0, nullptr);
  const auto est = estimate_local_lipschitz(cost, nullptr, {v2(1, 2), v2(2, 1)},
                                            0.5, 500, 3);
  CHECK(est.L_q == 0.0);
  CHECK(est.L_phi == 0.0);
}

TEST_CASE("lipschitz estimate grows with the tube radius") {
  CostSpec s = unit_spec();
  s.q_beta = 0.0;
  CostEvaluator cost(s, 2, 0, nullptr);
  const Trajectory nominal = {v2(3, 1), v2(2, 2), v2(1, 3)};
  double prev = 0.0;
  for (double R : {0.5, 1.0, 1.5, 2.0}) {
    const auto est =
        estimate_local_lipschitz(cost, nullptr, nominal, R, 2000, 7);
    CHECK(est.L_q >= prev);
    prev = est.L_q;
  }
}

TEST_CASE("probes inside obstacles are excluded and flagged") {
  ModelSpec m = make_single_integrator();
  ObstacleField field({{0, 0, 1}});
  BarrierSpec bspec;
  EmbeddedModel em(m, field, bspec);
  CostSpec s = unit_spec();
  s.goal = v2(5, 0);
  CostEvaluator cost(s, 2, 1, &field);

  // tube straddling the obstacle boundary
  const Trajectory nominal = {v2(1.5, 0), v2(1.5, 0)};
  const auto est =
      estimate_local_lipschitz(cost, &em, nominal, 1.0, 5000, 11);
  CHECK(est.tube_intersects_unsafe);
  CHECK(std::isfinite(est.L_q));
  CHECK(est.L_q > 0.0);

  // tube entirely inside the obstacle
  const Trajectory buried = {v2(0, 0), v2(0, 0)};
  CHECK_THROWS_AS(
      estimate_local_lipschitz(cost, &em, buried, 0.3, 500, 11),
      EmptyTube);
}

TEST_CASE("barrier term inflates the gradient estimate near an obstacle") {
  ModelSpec m = make_single_integrator();
  ObstacleField field({{0, 0, 1}});
  BarrierSpec bspec;
  EmbeddedModel em(m, field, bspec);
  CostSpec s = unit_spec();
  s.goal = v2(5, 0);
  s.q_beta = 10.0;
  CostEvaluator with_beta(s, 2, 1, &field);
  CostSpec s0 = s;
  s0.q_beta = 0.0;
  CostEvaluator without(s0, 2, 1, &field);

  const Trajectory nominal = {v2(1.2, 0), v2(1.2, 0)};
  const auto hi = estimate_local_lipschitz(with_beta, &em, nominal, 0.1,
                                           2000, 13);
  const auto lo = estimate_local_lipschitz(without, &em, nominal, 0.1,
                                           2000, 13);
  CHECK(hi.L_q > 5.0 * lo.L_q);
}

TEST_CASE("tiny tube recovers the pointwise gradient with barrier chain") {
  ModelSpec mdl = make_single_integrator();
  ObstacleField field({{0, 0, 1}});
  BarrierSpec bspec;
  EmbeddedModel em(mdl, field, bspec);
  CostSpec s = unit_spec();
  s.goal = v2(5, 0);
  s.q_beta = 7.0;
  CostEvaluator cost(s, 2, 1, &field);

  const Vec center = v2(1.4, 0.3);
  const auto est = estimate_local_lipschitz(cost, &em, {center, center},
                                            1e-4, 200, 5);

  // finite-difference gradient of the full smooth cost q(x) + q_beta beta(x)^2
  const double eps = 1e-7;
  Eigen::Vector2d fd;
  for (int i = 0; i < 2; ++i) {
    Vec xp = center, xm = center;
    xp[i] += eps;
    xm[i] -= eps;
    fd[i] = (cost.smooth_running(*em.augment(xp), 0) -
             cost.smooth_running(*em.augment(xm), 0)) /
            (2 * eps);
  }
  CHECK(est.L_q == doctest::Approx(fd.norm()).epsilon(1e-2));
}
