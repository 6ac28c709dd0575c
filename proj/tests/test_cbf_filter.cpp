#include <doctest.h>

#include <cmath>

#include "safempc/cbf_filter.hpp"
#include "safempc/rng.hpp"

using namespace safempc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("inactive constraints pass the nominal control through") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 15.0);
  ObstacleField field({{10, 10, 1}});
  const auto res = cbf_filter(spec, m, field, v2(0, 0), v2(3, -2));
  CHECK(res.feasible);
  CHECK((res.u - v2(3, -2)).norm() == 0.0);
}

TEST_CASE("one active constraint projects onto its halfspace") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 15.0);
  ObstacleField field({{0, 0, 1}});
  const State x = v2(2, 0);
  // constraint: dt * 2(p-c)^T u >= -alpha h  ->  0.2 u_x >= -0.6
  const Control u_nom = v2(-5, 1);
  const auto res = cbf_filter(spec, m, field, x, u_nom);
  CHECK(res.feasible);
  CHECK(res.u[0] == doctest::Approx(-3.0));
  CHECK(res.u[1] == doctest::Approx(1.0));
}

TEST_CASE("feasible outputs satisfy the exact decay condition") {
  CBFSpec spec;
  spec.alpha_gain = 0.3;
  ModelSpec m = make_single_integrator(0.05, 15.0);
  ObstacleField field({{1, 0, 0.8}, {-1.2, 0.5, 0.6}, {0, -1.5, 0.7}});
  RngStream rng(41);
  int active_cases = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const State x = v2(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5));
    if (field.min_h(x) <= 0.0) continue;
    const Control u_nom = v2(rng.uniform(-15, 15), rng.uniform(-15, 15));
    const auto res = cbf_filter(spec, m, field, x, u_nom);
    REQUIRE(res.feasible);
    if ((res.u - u_nom).norm() > 1e-12) ++active_cases;
    CHECK(res.u.maxCoeff() <= 15.0 + 1e-12);
    CHECK(res.u.minCoeff() >= -15.0 - 1e-12);
    const State next = step(m, x, res.u);
    for (int i = 0; i < field.count(); ++i)
      CHECK(field.h(next, i) >=
            (1.0 - spec.alpha_gain) * field.h(x, i) - 1e-9);
  }
  CHECK(active_cases > 20);  // the constraint set actually bites
}

TEST_CASE("filtering is idempotent on the feasible set") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 15.0);
  ObstacleField field({{1, 0, 0.8}, {-1, 1, 0.9}});
  RngStream rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const State x = v2(rng.uniform(-2, 2), rng.uniform(-2, 2));
    if (field.min_h(x) <= 0.0) continue;
    const Control u_nom = v2(rng.uniform(-15, 15), rng.uniform(-15, 15));
    const auto once = cbf_filter(spec, m, field, x, u_nom);
    if (!once.feasible) continue;
    const auto twice = cbf_filter(spec, m, field, x, once.u);
    CHECK(twice.feasible);
    CHECK((twice.u - once.u).norm() <= 1e-9);
  }
}

TEST_CASE("projection never beats a feasible brute-force grid point") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 4.0);
  ObstacleField field({{0.9, 0, 0.8}, {0, 1.0, 0.7}});
  RngStream rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const State x = v2(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    if (field.min_h(x) <= 0.0) continue;
    const Control u_nom = v2(rng.uniform(-6, 6), rng.uniform(-6, 6));
    const auto res = cbf_filter(spec, m, field, x, u_nom);
    REQUIRE(res.feasible);
    const double d_opt = (res.u - u_nom).squaredNorm();
    for (double ux = -4; ux <= 4; ux += 0.05) {
      for (double uy = -4; uy <= 4; uy += 0.05) {
        const Control u = v2(ux, uy);
        bool ok = true;
        for (int i = 0; i < field.count() && ok; ++i)
          ok = m.dt * field.h_grad(x, i).dot(u) >=
               -spec.alpha_gain * field.h(x, i);
        if (ok) CHECK(d_opt <= (u - u_nom).squaredNorm() + 1e-6);
      }
    }
  }
}

TEST_CASE("unsafe start with a tiny box reports infeasible") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 0.1);
  // wall of three overlapping obstacles; the state sits inside the wall
  ObstacleField field({{2, -1, 1.5}, {2, 0, 1.5}, {2, 1, 1.5}});
  const State x = v2(2, 0);  // deep inside, h < 0 for all three
  REQUIRE(field.min_h(x) < 0.0);
  const auto res = cbf_filter(spec, m, field, x, v2(0.1, 0));
  CHECK(!res.feasible);
  CHECK(res.u.cwiseAbs().maxCoeff() <= 0.1 + 1e-12);
}

TEST_CASE("infeasible output is least violating against a grid") {
  CBFSpec spec;
  ModelSpec m = make_single_integrator(0.05, 0.2);
  ObstacleField field({{1.5, 0, 1.4}, {1.5, 1.2, 1.4}});
  const State x = v2(1.5, 0.6);  // inside both
  REQUIRE(field.min_h(x) < 0.0);
  const auto res = cbf_filter(spec, m, field, x, v2(0, 0));
  REQUIRE(!res.feasible);

  auto violation = [&](const Control& u) {
    double v = 0.0;
    for (int i = 0; i < field.count(); ++i) {
      const double slack = m.dt * field.h_grad(x, i).dot(u) +
                           spec.alpha_gain * field.h(x, i);
      if (slack < 0.0) v += slack * slack;
    }
    return v;
  };
  const double v_opt = violation(res.u);
  for (double ux = -0.2; ux <= 0.2; ux += 0.01)
    for (double uy = -0.2; uy <= 0.2; uy += 0.01)
      CHECK(v_opt <= violation(v2(ux, uy)) + 1e-9);
}

TEST_CASE("spec validation") {
  ModelSpec m = make_single_integrator();
  ObstacleField field({{0, 0, 1}});
  CBFSpec bad;
  bad.alpha_gain = 0.0;
  CHECK_THROWS_AS(cbf_filter(bad, m, field, v2(2, 0), v2(0, 0)),
                  ContractViolation);
  CBFSpec spec;
  ModelSpec di = make_double_integrator();
  Vec x4 = Vec::Zero(4);
  x4 << 2, 0, 0, 0;
  CHECK_THROWS_AS(cbf_filter(spec, di, field, x4, v2(0, 0)),
                  ContractViolation);
}
