#include <doctest.h>

#include <cmath>

#include "safempc/barrier.hpp"
#include "safempc/rng.hpp"

using namespace safempc;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("constraint values for a unit circle") {
  ObstacleField field({{1, 0, 1}});
  CHECK(field.h(v2(3, 0), 0) == doctest::Approx(3.0));
  CHECK(field.h(v2(2, 0), 0) == doctest::Approx(0.0));
  CHECK(field.h(v2(1, 0), 0) == doctest::Approx(-1.0));
  CHECK(field.h_grad(v2(3, 0), 0).isApprox(Eigen::Vector2d(4, 0)));
}

TEST_CASE("min over obstacles, empty field") {
  ObstacleField field({{0, 0, 1}, {5, 0, 2}});
  CHECK(field.min_h(v2(3, 0)) == doctest::Approx(0.0));  // 8 vs 0
  CHECK(field.interior(v2(2.5, 2)));
  CHECK(!field.interior(v2(5, 0)));

  ObstacleField none;
  CHECK(std::isinf(none.min_h(v2(0, 0))));
  CHECK(none.interior(v2(0, 0)));
}

TEST_CASE("field validation") {
  CHECK_THROWS_AS(ObstacleField({{0, 0, -1}}), ContractViolation);
  CHECK_THROWS_AS(ObstacleField({{0, 0, 0}}), ContractViolation);
}

TEST_CASE("barrier shapes") {
  BarrierSpec inv;  // defaults to inverse
  CHECK(barrier_eval(inv, 2.0).value() == doctest::Approx(0.5));

  BarrierSpec log_s;
  log_s.kind = BarrierKind::kLogShifted;
  const double far = barrier_eval(log_s, 1e6).value();
  CHECK(far > 0.0);
  CHECK(far < 1e-5);

  BarrierSpec expb;
  expb.kind = BarrierKind::kExponential;
  expb.gamma = 2.0;
  CHECK(barrier_eval(expb, 1.0).value() == doctest::Approx(std::exp(-2.0)));
  // bounded kind stays defined through the boundary
  CHECK(barrier_eval(expb, -0.5).has_value());
}

TEST_CASE("unbounded kinds trip the floor") {
  for (BarrierKind kind : {BarrierKind::kInverse, BarrierKind::kLogShifted}) {
    BarrierSpec spec;
    spec.kind = kind;
    CHECK(!barrier_eval(spec, 1e-9).has_value());
    CHECK(!barrier_eval(spec, 0.0).has_value());
    CHECK(!barrier_eval(spec, -1.0).has_value());
    CHECK(barrier_eval(spec, 2.0 * spec.epsilon_h).has_value());
  }
  // just above the floor the inverse barrier already dwarfs any cost scale
  BarrierSpec inv;
  CHECK(barrier_eval(inv, 1.001 * inv.epsilon_h).value() >
        0.99 / inv.epsilon_h);
}

TEST_CASE("barriers decrease in h and the slope agrees") {
  for (BarrierKind kind :
       {BarrierKind::kInverse, BarrierKind::kLogShifted,
        BarrierKind::kExponential}) {
    BarrierSpec spec;
    spec.kind = kind;
    double prev = barrier_eval(spec, 0.01).value();
    for (double h = 0.02; h < 20.0; h *= 1.5) {
      const double cur = barrier_eval(spec, h).value();
      CHECK(cur < prev);
      CHECK(cur > 0.0);
      prev = cur;
      // slope vs central difference
      const double d = 1e-6 * h;
      const double fd = (barrier_eval(spec, h + d).value() -
                         barrier_eval(spec, h - d).value()) /
                        (2 * d);
      CHECK(barrier_slope(spec, h) ==
            doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("capped evaluation never fails and saturates") {
  BarrierSpec spec;
  CHECK(barrier_eval_capped(spec, 2.0) == doctest::Approx(0.5));
  CHECK(barrier_eval_capped(spec, -3.0) == doctest::Approx(1.0 / spec.epsilon_h));
  spec.value_cap = 100.0;
  CHECK(barrier_eval_capped(spec, 1e-9) == doctest::Approx(100.0));
}

TEST_CASE("one-step barrier recursion composes through the dynamics") {
  ModelSpec m = make_single_integrator(0.05);
  ObstacleField field({{0, 0, 1}});
  BarrierSpec spec;

  const auto beta = dbas_step(spec, field, m, v2(2, 0), v2(0, 0));
  REQUIRE(beta.has_value());
  CHECK(beta->size() == 1);
  CHECK((*beta)[0] == doctest::Approx(1.0 / 3.0));

  // driving the successor onto the boundary blows up
  const Control to_boundary = v2(-1.0 / m.dt, 0.0);  // successor (1, 0)
  ModelSpec wide = make_single_integrator(0.05, 100.0);
  CHECK(!dbas_step(spec, field, wide, v2(2, 0), to_boundary).has_value());
}

TEST_CASE("summed aggregation adds the per-obstacle barriers") {
  ModelSpec m = make_single_integrator(0.05);
  ObstacleField field({{0, 0, 1}, {4, 0, 1.5}});
  const State x = v2(2, 0.5);
  const Control u = v2(1, -1);

  BarrierSpec vec_spec;
  vec_spec.aggregation = BarrierAggregation::kVector;
  const auto beta_vec = dbas_step(vec_spec, field, m, x, u);
  REQUIRE(beta_vec.has_value());
  REQUIRE(beta_vec->size() == 2);

  const State next = step(m, x, u);
  for (int i = 0; i < 2; ++i)
    CHECK((*beta_vec)[i] ==
          doctest::Approx(barrier_eval(vec_spec, field.h(next, i)).value()));

  BarrierSpec sum_spec;
  const auto beta_sum = dbas_step(sum_spec, field, m, x, u);
  REQUIRE(beta_sum.has_value());
  CHECK((*beta_sum)[0] ==
        doctest::Approx((*beta_vec)[0] + (*beta_vec)[1]));
}

TEST_CASE("embedding with zero obstacles reduces to the plain model") {
  ModelSpec m = make_single_integrator();
  BarrierSpec summed;
  EmbeddedModel em(m, ObstacleField(), summed);
  CHECK(em.dim() == 3);
  CHECK(em.beta_dim() == 1);

  const auto xb = em.augment(v2(1, 2));
  REQUIRE(xb.has_value());
  CHECK((*xb)[2] == 0.0);
  const auto next = em.step(*xb, v2(1, 0));
  REQUIRE(next.has_value());
  CHECK((em.phys(*next) - step(m, v2(1, 2), v2(1, 0))).norm() == 0.0);
  CHECK(em.beta(*next)[0] == 0.0);

  BarrierSpec vec_spec;
  vec_spec.aggregation = BarrierAggregation::kVector;
  EmbeddedModel emv(m, ObstacleField(), vec_spec);
  CHECK(emv.dim() == 2);
  CHECK(emv.beta_dim() == 0);
}

TEST_CASE("augmented split round-trips") {
  ModelSpec m = make_double_integrator();
  ObstacleField field({{3, 3, 1}});
  BarrierSpec spec;
  EmbeddedModel em(m, field, spec);
  Vec x(4);
  x << 0, 0, 1, -1;
  const auto xb = em.augment(x);
  REQUIRE(xb.has_value());
  CHECK((em.phys(*xb) - x).norm() == 0.0);
  CHECK(em.beta(*xb)[0] == doctest::Approx(1.0 / field.h(x, 0)));
  CHECK((em.augment_capped(x) - *xb).norm() == 0.0);
}

namespace {

double jac_rel_err(const EmbeddedModel& em, const Vec& xb, const Control& u) {
  Mat A, B, Afd, Bfd;
  REQUIRE(em.jacobians(xb, u, A, B));
  REQUIRE(em.jacobians_fd(xb, u, Afd, Bfd, 1e-6));
  const double scale =
      std::max({1.0, A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff()});
  return std::max((A - Afd).cwiseAbs().maxCoeff(),
                  (B - Bfd).cwiseAbs().maxCoeff()) /
         scale;
}

}  // namespace

TEST_CASE("embedded jacobians match finite differences at interior states") {
  ObstacleField field({{3, 3, 1}, {6, 2, 1.5}, {2, 7, 2}});
  for (ModelKind kind :
       {ModelKind::kSingleIntegrator, ModelKind::kDoubleIntegrator}) {
    for (BarrierKind bkind :
         {BarrierKind::kInverse, BarrierKind::kLogShifted,
          BarrierKind::kExponential}) {
      for (BarrierAggregation agg :
           {BarrierAggregation::kSingleSummed, BarrierAggregation::kVector}) {
        ModelSpec m = kind == ModelKind::kSingleIntegrator
                          ? make_single_integrator()
                          : make_double_integrator();
        BarrierSpec spec;
        spec.kind = bkind;
        spec.aggregation = agg;
        EmbeddedModel em(m, field, spec);

        RngStream rng(stream_key(2024, static_cast<uint64_t>(bkind),
                                 static_cast<uint64_t>(agg),
                                 static_cast<uint64_t>(kind)));
        int tested = 0;
        double worst = 0.0;
        while (tested < 100) {
          Vec x(m.state_dim());
          x[0] = rng.uniform(0, 9);
          x[1] = rng.uniform(0, 9);
          for (int i = 2; i < x.size(); ++i) x[i] = rng.uniform(-3, 3);
          const Control u = v2(rng.uniform(-5, 5), rng.uniform(-5, 5));
          const State next = step(m, x, u);
          if (field.min_h(x) <= 0.1 || field.min_h(next) <= 0.1) continue;
          const auto xb = em.augment(x);
          REQUIRE(xb.has_value());
          worst = std::max(worst, jac_rel_err(em, *xb, u));
          ++tested;
        }
        CHECK(worst < 1e-5);
      }
    }
  }
}

TEST_CASE("jacobians report blow-up when the successor leaves the interior") {
  ModelSpec m = make_single_integrator(0.05, 100.0);
  ObstacleField field({{0, 0, 1}});
  BarrierSpec spec;
  EmbeddedModel em(m, field, spec);
  const auto xb = em.augment(v2(2, 0));
  REQUIRE(xb.has_value());
  Mat A, B;
  CHECK(!em.jacobians(*xb, v2(-20.0, 0), A, B));     // successor at (1,0)
  CHECK(!em.jacobians_fd(*xb, v2(-20.0, 0), A, B));
}

TEST_CASE("finite barrier state certifies constraint satisfaction") {
  // Proposition-1 direction used everywhere: if every step of a rollout
  // returns a (finite) barrier state, every visited state is strictly
  // inside the safe set.
  ModelSpec m = make_single_integrator();
  ObstacleField field({{2, 2, 1}, {5, 4, 1.2}, {3.5, 6, 0.8}});
  BarrierSpec spec;
  EmbeddedModel em(m, field, spec);

  int survived = 0, blew_up = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    RngStream rng(stream_key(31, trial));
    Vec x = v2(rng.uniform(0, 8), rng.uniform(0, 8));
    auto xb = em.augment(x);
    if (!xb) {
      ++blew_up;
      continue;
    }
    bool alive = true;
    for (int k = 0; k < 30 && alive; ++k) {
      CHECK(field.min_h(em.phys(*xb)) > 0.0);
      const Control u = v2(rng.uniform(-5, 5), rng.uniform(-5, 5));
      const auto next = em.step(*xb, u);
      if (!next) {
        alive = false;
        ++blew_up;
      } else {
        xb = next;
      }
    }
    if (alive) {
      CHECK(field.min_h(em.phys(*xb)) > 0.0);
      ++survived;
    }
  }
  // both outcomes must actually occur for the property to mean anything
  CHECK(survived > 50);
  CHECK(blew_up > 50);
}
