#include "chrflow/errors.hpp"
#include "chrflow/gradientflow.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace chr;
using namespace chr::fixtures;

namespace {

Field random_field(const GridPtr& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Eigen::VectorXd v(g->size());
  for (auto& x : v) x = U(rng);
  return Field(g, v);
}

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("functional A examples") {
  auto g = make_grid(1, {1.0, 0.0}, {17, 0});
  Field c = sample(g, [](double, double) { return 0.5; });
  ReactionRate lin;
  lin.kappa = 1.7;
  CHECK(functional_A(c, Field(g), lin) == 0.0);
  CHECK(functional_A(c, Field(g), unit_bv(RateKind::truncated_bv)) == doctest::Approx(0.0));
  CHECK(functional_A(c, sample(g, [](double, double) { return 1.0; }), lin) ==
        doctest::Approx(1.7));

  std::mt19937_64 rng(2);
  for (const ReactionRate& r : {lin, unit_bv(RateKind::truncated_bv)}) {
    for (int t = 0; t < 100; ++t) {
      Field a = random_field(g, rng, -3, 3), b = random_field(g, rng, -3, 3);
      Field m(g, 0.5 * (a.values() + b.values()));
      CHECK(functional_A(c, m, r) <=
            0.5 * (functional_A(c, a, r) + functional_A(c, b, r)) + 1e-12);
    }
  }
}

TEST_CASE("conjugate A* and Fenchel-Young") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  Field c = sample(g, [](double x, double) { return 0.3 + 0.4 * x; });
  ReactionRate lin;
  lin.kappa = 0.8;
  AstarResult z = conjugate_Astar(c, Field(g), lin);
  CHECK(z.value == 0.0);
  CHECK(max_abs(z.mu.values()) == 0.0);

  std::mt19937_64 rng(17);
  Field v = random_field(g, rng, -1, 1);
  const double a1 = conjugate_Astar(c, v, lin).value;
  const double a2 = conjugate_Astar(c, Field(g, 2 * v.values()), lin).value;
  CHECK(a2 == doctest::Approx(4 * a1).epsilon(1e-9));

  for (const ReactionRate& r : {lin, unit_bv(RateKind::truncated_bv)}) {
    for (int t = 0; t < 20; ++t) {
      Field vs = random_field(g, rng, -2, 2);
      AstarResult a = conjugate_Astar(c, vs, r);
      const double pairing = g->quad_weights().dot(vs.values().cwiseProduct(a.mu.values()));
      CHECK(std::abs(a.value + functional_A(c, a.mu, r) - pairing) <= 1e-8 * (1 + std::abs(a.value)));
      // mu maximizes <v*, v> - A(v)
      Field pert(g, a.mu.values() + 1e-3 * random_field(g, rng, -1, 1).values());
      const double other = g->quad_weights().dot(vs.values().cwiseProduct(pert.values())) -
                           functional_A(c, pert, r);
      CHECK(other <= a.value + 1e-12);
    }
  }
}

TEST_CASE("time grid") {
  TimeGrid tg{0.5, 10};
  CHECK(tg.tau() == doctest::Approx(0.05));
  CHECK_THROWS_AS((TimeGrid{0.0, 3}).validate(), InvalidArgument);
  CHECK_THROWS_AS((TimeGrid{1.0, 0}).validate(), InvalidArgument);
  CHECK_NOTHROW((TimeGrid{1.0, 0}).validate(true));
}

TEST_CASE("run_weak with zero steps") {
  auto g = make_grid(1, {1.0, 0.0}, {17, 0});
  Field c0 = smooth_perturbation(g, 1);
  ModelParams p = reference_model();
  Trajectory t = run_weak(c0, TimeGrid{1.0, 0}, p);
  CHECK(t.states.size() == 1);
  CHECK(t.reports.empty());
  CHECK(t.energy0 == doctest::Approx(total_energy(c0, nullptr, p)));
}

TEST_CASE("equilibrium preservation") {
  ModelParams p = reference_model();
  p.rate = unit_bv();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  CHECK(std::abs(p.rate.rate(cs, p.free_energy.eval(cs, 1))) < 1e-12);
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  Field c0 = sample(g, [&](double, double) { return cs; });
  Trajectory t = run_weak(c0, TimeGrid{0.1, 100}, p);
  REQUIRE(!t.error);
  REQUIRE(t.states.size() == 101);
  double drift = 0, mudrift = 0;
  for (const auto& s : t.states) {
    drift = std::max(drift, max_abs(s.c.values().array() - cs));
    mudrift = std::max(mudrift, max_abs(s.mu.values().array() - p.free_energy.eval(cs, 1)));
  }
  CHECK(drift < 1e-9);
  CHECK(mudrift < 1e-9);
}

TEST_CASE("mass conservation without reaction") {
  ModelParams p = reference_model();
  p.rate = ReactionRate{};
  p.rate.kappa = 0.0;
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  Field c0 = smooth_perturbation(g, 3);
  Trajectory t = run_weak(c0, TimeGrid{0.01, 10}, p);
  REQUIRE(!t.error);
  for (const auto& r : t.reports) CHECK(std::abs(r.mass - integrate(c0)) < 1e-12);
}

TEST_CASE("energy estimate and mass-flux identity") {
  ModelParams p = reference_model();
  auto g = make_grid(1, {1.0, 0.0}, {65, 0});
  Field c0 = smooth_perturbation(g, 42);
  Trajectory t = run_weak(c0, TimeGrid{0.01, 10}, p);
  REQUIRE(!t.error);
  double prev_mass = integrate(c0);
  for (const auto& r : t.reports) {
    CHECK(r.energy_ok);
    CHECK(r.step_slack >= -1e-8 * std::abs(t.energy0));
    CHECK(std::abs(r.mass - prev_mass - 1e-3 * r.flux) <= 1e-10 * (1 + std::abs(r.mass)));
    CHECK(r.max_residual <= 1e-10);
    prev_mass = r.mass;
  }
}

TEST_CASE("objective descent") {
  ModelParams p = reference_model();
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  Field c0 = smooth_perturbation(g, 5);
  TimeGrid tg{0.02, 4};
  State s = initial_state(c0, p);
  for (int i = 0; i < 4; ++i) {
    auto [next, rep] = mm_step(s, tg, p);
    const double jn = mm_objective(next.c, s.c, tg.tau(), p);
    const double jp = mm_objective(s.c, s.c, tg.tau(), p);
    CHECK(jn <= jp + 1e-10);
    s = next;
  }
}

TEST_CASE("descent fallback reaches the same step") {
  ModelParams p = reference_model();
  auto g = make_grid(1, {1.0, 0.0}, {17, 0});
  Field c0 = smooth_perturbation(g, 8);
  State s0 = initial_state(c0, p);
  TimeGrid tg{1e-3, 1};
  auto [ref, r0] = mm_step(s0, tg, p);
  WeakOptions opt;
  opt.newton.max_iter = 1;
  // one Newton iteration is not enough, so the descent path runs first
  auto [fb, r1] = mm_step(s0, tg, p, opt);
  CHECK(r1.fallback);
  CHECK(r1.max_residual <= opt.newton.abs_tol);
  CHECK(max_abs(fb.c.values() - ref.c.values()) < 1e-9);
}

TEST_CASE("domain exit is reported with the node") {
  ModelParams p = reference_model();
  auto g = make_grid(1, {1.0, 0.0}, {17, 0});
  Field c0 = sample(g, [](double x, double) { return x < 0.5 ? 0.5 : 1.2; });
  try {
    (void)initial_state(c0, p);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.node() == 8);
  }
}

TEST_CASE("elasticity with zero misfit matches the plain run") {
  ModelParams p = reference_model();
  auto g = make_grid(2, {1.0, 1.0}, {9, 9});
  Field c0 = smooth_perturbation(g, 6, 0.15);
  Trajectory plain = run_weak(c0, TimeGrid{0.004, 4}, p);
  p.elasticity = ElasticParams{};
  Trajectory el = run_weak(c0, TimeGrid{0.004, 4}, p);
  REQUIRE(!plain.error);
  REQUIRE(!el.error);
  for (std::size_t i = 0; i < plain.states.size(); ++i)
    CHECK(max_abs(plain.states[i].c.values() - el.states[i].c.values()) < 1e-10);
}

TEST_CASE("elastic run keeps the stress residual small") {
  ModelParams p = reference_model();
  ElasticParams ep;
  ep.e0 = {0.05, 0.0, 0.0, 0.02};
  p.elasticity = ep;
  auto g = make_grid(2, {1.0, 1.0}, {9, 9});
  Field c0 = smooth_perturbation(g, 9, 0.15);
  Trajectory t = run_weak(c0, TimeGrid{0.004, 3}, p);
  REQUIRE(!t.error);
  ElasticOperator op(g, ep);
  for (std::size_t i = 1; i < t.states.size(); ++i) {
    const auto& s = t.states[i];
    const Eigen::VectorXd rhs = op.coupling().transpose() * s.c.values();
    CHECK(max_abs(op.grad_u(s.c.values(), s.u->values())) <= 1e-8 * max_abs(rhs));
    CHECK(t.reports[i - 1].energy_ok);
  }
}

TEST_CASE("trajectory csv layout") {
  ModelParams p = reference_model();
  auto g = make_grid(1, {1.0, 0.0}, {17, 0});
  Trajectory t = run_weak(smooth_perturbation(g, 1), TimeGrid{0.01, 2}, p);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "i,t,energy,Astar,Aanchor,mass,flux,newton_iters,max_residual");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
  CHECK(params_hash(p) == t.params_hash);
  ModelParams q = p;
  q.rho = 2.0;
  CHECK(params_hash(q) != params_hash(p));
}
