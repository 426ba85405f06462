#include "chrflow/errors.hpp"
#include "chrflow/strongsolver.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace chr;
using namespace chr::fixtures;

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

Field bump(const GridPtr& g, double base, double eps) {
  return sample(g, [&](double x, double) {
    const double b = 1.0 - std::cos(2.0 * M_PI * x);
    return base + eps * b * b;
  });
}

// biharmonic error at t = T for c = e^{-t} cos(pi x)
Field manufactured_run(int n, int steps, double T) {
  auto g = make_grid(1, {1.0, 0.0}, {n, 0});
  const double tau = T / steps;
  BiharmonicStepper st(g, tau);
  Field c = sample(g, [](double x, double) { return std::cos(M_PI * x); });
  const double p4 = std::pow(M_PI, 4);
  for (int i = 1; i <= steps; ++i) {
    const double t = i * tau;
    Field gi = sample(g, [&](double x, double) { return (p4 - 1.0) * std::exp(-t) * std::cos(M_PI * x); });
    c = st.step(c, gi.values(), {}, {});
  }
  return c;
}

}  // namespace

TEST_CASE("psi examples and bounds") {
  Truncation tr{2.0};
  CHECK(psi_eval(tr, 1.0, 0) == 1.0);
  CHECK(psi_eval(tr, -2.0, 0) == -2.0);
  CHECK(psi_eval(tr, 4.0, 0) == doctest::Approx(psi_eval(tr, 3.0, 0)).epsilon(1e-15));
  CHECK(psi_eval(tr, 4.0, 0) == doctest::Approx(2.5));
  CHECK(psi_eval(tr, 4.0, 1) == 0.0);
  CHECK(psi_eval(tr, -3.5, 0) == doctest::Approx(-2.5));
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k <= 20000; ++k) {
    const double x = -5.0 + 10.0 * k / 20000.0;
    const double d = tr.psi(x, 1);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    CHECK(tr.psi(-x) == -tr.psi(x));
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 2.0);
  // derivative matches the difference quotient across the blend
  for (double x : {2.1, 2.5, 2.9}) {
    const double fd = (tr.psi(x + 1e-6) - tr.psi(x - 1e-6)) / 2e-6;
    CHECK(fd == doctest::Approx(tr.psi(x, 1)).epsilon(1e-7));
  }
  CHECK_THROWS_AS(psi_eval(tr, 0.0, 2), InvalidArgument);
  CHECK_THROWS_AS(Truncation{0.0}.validate(), InvalidArgument);
}

TEST_CASE("truncated Laplacian of f' examples") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const FreeEnergy rs = regular_solution();
  Field c = sample(g, [](double, double) { return 0.4; });
  CHECK(max_abs(truncated_laplacian_fprime(c, rs, Truncation{1.0}).values()) < 1e-20);

  Field s = sample(g, [](double x, double) { return 0.5 + 0.01 * std::cos(M_PI * x); });
  const Field a = truncated_laplacian_fprime(s, rs, Truncation{10.0});
  const Field b = laplacian_fprime(s, rs);
  CHECK(max_abs(a.values() - b.values()) == 0.0);

  FreeEnergy q;
  q.kind = FreeEnergyKind::quadratic;
  Field big = sample(g, [](double x, double) { return std::cos(3.0 * M_PI * x); });
  const Truncation tr{5.0};
  const Field lap = laplacian(big);
  const Field out = truncated_laplacian_fprime(big, q, tr);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(out[k] == doctest::Approx(tr.psi(lap[k])));
  const Field small = truncated_laplacian_fprime(s, q, tr);
  CHECK(max_abs(small.values() - laplacian(s).values()) == 0.0);

  Field bad = sample(g, [](double x, double) { return 0.5 + x; });
  CHECK_THROWS_AS(truncated_laplacian_fprime(bad, rs, tr), DomainError);
}

TEST_CASE("script_R examples") {
  FreeEnergy q;
  q.kind = FreeEnergyKind::quadratic;
  ReactionRate lin;
  lin.kappa = 2.5;
  CHECK(script_R(lin, q, 0.7, 0.2) == doctest::Approx(2.5 * (0.7 - 0.2)));

  const ModelParams p = reference_model();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  CHECK(std::abs(script_R(p.rate, p.free_energy, cs, 0.0)) < 1e-12);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> S(0.05, 0.95), W(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double s = S(rng), w = W(rng);
    const double sum = script_R(p.rate, p.free_energy, s, w) +
                       p.rate.rate(s, -w + p.free_energy.eval(s, 1));
    CHECK(sum == 0.0);
  }
}

TEST_CASE("biharmonic steady state and mean identity") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  BiharmonicData data;
  Field c = sample(g, [](double, double) { return 0.3; });
  CHECK(max_abs(biharmonic_step(c, data, 1e-3, 1e-3).values() - c.values()) < 1e-12);

  auto g2 = make_grid(2, {1.0, 0.5}, {17, 9});
  Field c0 = sample(g2, [&](double x, double y) { return std::cos(M_PI * x) * std::cos(2 * M_PI * y); });
  data.g = [&](double t) { return sample(g2, [&](double x, double y) { return std::sin(3 * x + t) * y; }); };
  auto face = [&](double t, double shift) {
    std::vector<double> v;
    for (std::size_t k = 0; k < g2->boundary().size(); ++k) v.push_back(std::cos(0.7 * k + t + shift));
    return v;
  };
  data.beta_bc = [&](double t) { return face(t, 0.0); };
  data.alpha_bc = [&](double t) { return face(t, 1.0); };
  const double tau = 2e-3;
  for (int i = 1; i <= 5; ++i) {
    const double t = i * tau;
    const Field c1 = biharmonic_step(c0, data, tau, t);
    const double lhs = integrate(c1) - integrate(c0);
    const double rhs = tau * (integrate(data.g(t)) - boundary_source(*g2, data.beta_bc(t)).sum());
    CHECK(std::abs(lhs - rhs) < 1e-10);
    c0 = c1;
  }
}

TEST_CASE("biharmonic manufactured solution orders") {
  const double T = 0.1;
  auto err = [&](int n, int steps) {
    Field c = manufactured_run(n, steps, T);
    Field ex = sample(c.grid_ptr(), [&](double x, double) { return std::exp(-T) * std::cos(M_PI * x); });
    return max_abs(c.values() - ex.values());
  };
  const double e33 = err(33, 4000), e65 = err(65, 4000), e129 = err(129, 4000);
  const double ps = std::log2((e33 - e65) / (e65 - e129));
  CHECK(ps > 1.7);
  CHECK(ps < 2.3);
  const double t4 = err(65, 250), t2 = err(65, 500), t1 = err(65, 1000);
  const double pt = std::log2((t4 - t2) / (t2 - t1));
  CHECK(pt > 0.8);
  CHECK(pt < 1.2);
}

TEST_CASE("compatibility examples") {
  auto g = make_grid(1, {1.0, 0.0}, {65, 0});
  const ModelParams p = reference_model();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  CHECK(compatibility_check(sample(g, [&](double, double) { return cs; }), p, 1).ok);
  const auto off = compatibility_check(sample(g, [](double, double) { return 0.5; }), p, 1);
  CHECK(off.level0_ok);
  CHECK_FALSE(off.ok);
  const auto cosine = compatibility_check(
      sample(g, [](double x, double) { return 0.5 + 0.1 * std::cos(M_PI * x); }), p, 0);
  CHECK(cosine.ok);
  const auto lin = compatibility_check(sample(g, [](double x, double) { return x; }), p, 0);
  CHECK_FALSE(lin.ok);
  REQUIRE(lin.residual0.size() == 2);
  CHECK(std::abs(lin.residual0[0]) == doctest::Approx(1.0));
  CHECK(std::abs(lin.residual0[1]) == doctest::Approx(1.0));
  CHECK(compatibility_check(bump(g, cs, 0.02), p, 1).ok);
  CHECK_THROWS_AS(compatibility_check(bump(g, cs, 0.02), p, 2), InvalidArgument);
}

TEST_CASE("Picard at equilibrium") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const ModelParams p = reference_model();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  const Field c0 = sample(g, [&](double, double) { return cs; });
  Trajectory tr = picard_solve(c0, p, TimeGrid{0.1, 100});
  REQUIRE(tr.strong);
  CHECK(tr.strong->outer_iters == 1);
  double drift = 0.0;
  for (const State& s : tr.states) drift = std::max(drift, max_abs(s.c.values() - c0.values()));
  CHECK(drift < 1e-9);
  CHECK(detruncate_check(tr, Truncation{*p.truncation}).ok);
}

TEST_CASE("Picard small data: residual, detruncation, contraction trend") {
  auto g = make_grid(1, {1.0, 0.0}, {65, 0});
  ModelParams p = reference_model();
  p.rate.k_ins = 0.5;  // equilibrium at c = 1/2
  const Field c0 = bump(g, 0.5, 0.05);
  double prev_ratio = INFINITY;
  for (double T : {0.1, 0.05, 0.025}) {
    PicardOptions opt;
    Trajectory tr = picard_solve(c0, p, TimeGrid{T, static_cast<int>(std::lround(T / 1e-3))}, opt);
    REQUIRE(tr.strong);
    double ratio = 0.0;
    for (double r : tr.strong->contraction) ratio = std::max(ratio, r);
    CHECK(ratio < prev_ratio);
    prev_ratio = ratio;
    const auto trunc = strong_residuals(tr, p, true);
    for (double r : trunc) CHECK(r <= 10.0 * opt.tol);
    const DetruncationResult d = detruncate_check(tr, Truncation{*p.truncation});
    CHECK(d.ok);
    // identity region: untruncated residual is the same number
    const auto plain = strong_residuals(tr, p, false);
    REQUIRE(plain.size() == trunc.size());
    for (std::size_t i = 0; i < plain.size(); ++i) CHECK(plain[i] == trunc[i]);
  }
}

TEST_CASE("Picard preconditions and divergence report") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  ModelParams p = reference_model();
  const Field c0 = sample(g, [](double x, double) { return 0.5 + 0.1 * x; });
  CHECK_THROWS_AS(picard_solve(c0, p, TimeGrid{0.01, 10}), InvalidArgument);
  ModelParams q = p;
  q.truncation.reset();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  const Field eq = sample(g, [&](double, double) { return cs; });
  CHECK_THROWS_AS(picard_solve(eq, q, TimeGrid{0.01, 10}), InvalidArgument);
  q = p;
  q.rho = 2.0;
  CHECK_THROWS_AS(picard_solve(eq, q, TimeGrid{0.01, 10}), InvalidArgument);

  PicardOptions opt;
  opt.max_outer = 2;
  p.rate.k_ins = 0.5;
  try {
    picard_solve(bump(g, 0.5, 0.1), p, TimeGrid{0.1, 100}, opt);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(!e.history().empty());
  }
}

TEST_CASE("detruncation spike") {
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const ModelParams p = reference_model();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  const Field c0 = sample(g, [&](double, double) { return cs; });
  Trajectory tr = picard_solve(c0, p, TimeGrid{0.01, 10});
  CHECK(detruncate_check(tr, Truncation{1.0}).ok);
  tr.states[4].c[17] += 0.5;
  const DetruncationResult d = detruncate_check(tr, Truncation{1.0});
  CHECK_FALSE(d.ok);
  REQUIRE(d.first_violation);
  CHECK(d.first_violation->first == 4);
  CHECK(d.first_violation->second == 16);
  CHECK(d.max_laplacian > 1.0);
}
