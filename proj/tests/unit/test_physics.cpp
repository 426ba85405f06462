#include "chrflow/errors.hpp"
#include "chrflow/operators.hpp"
#include "chrflow/physics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace chr;

namespace {

FreeEnergy regular(double omega, double kt) {
  FreeEnergy f;
  f.kind = FreeEnergyKind::regular_solution;
  f.omega = omega;
  f.kt = kt;
  return f;
}

ReactionRate bv() {
  ReactionRate r;
  r.kind = RateKind::butler_volmer;
  return r;
}

ReactionRate tbv() {
  ReactionRate r;
  r.kind = RateKind::truncated_bv;
  r.w_max = 2.0;
  r.mu_e = 0.3;
  return r;
}

}  // namespace

TEST_CASE("free energy examples") {
  CHECK(f_eval(regular(2.5, 0.7), 0.5, 1) == doctest::Approx(0.0));
  CHECK(f_eval(regular(0.0, 1.0), 0.5, 0) == doctest::Approx(std::log(0.5)));
  FreeEnergy dw;
  dw.kind = FreeEnergyKind::double_well;
  for (double s : {-1.0, 1.0}) {
    CHECK(f_eval(dw, s, 1) == doctest::Approx(0.0));
    CHECK(f_eval(dw, s, 2) == doctest::Approx(8.0));
  }
  CHECK_THROWS_AS(f_eval(regular(1.0, 1.0), 1.2, 0), DomainError);
  CHECK_THROWS_AS(f_eval(regular(1.0, 1.0), 0.0, 1), DomainError);
}

TEST_CASE("free energy derivative consistency") {
  std::mt19937_64 rng(7);
  FreeEnergy dw;
  dw.kind = FreeEnergyKind::double_well;
  FreeEnergy quad;
  FreeEnergy clamped = dw;
  clamped.clamp = std::array<double, 2>{-1.5, 1.5};
  const double h = 1e-5;
  for (const FreeEnergy& fe : {regular(3.0, 1.0), dw, quad, clamped}) {
    const bool reg = fe.kind == FreeEnergyKind::regular_solution;
    std::uniform_real_distribution<double> U(reg ? 0.05 : -2.0, reg ? 0.95 : 2.0);
    for (int k = 0; k < 100; ++k) {
      const double s = U(rng);
      for (int order = 0; order < 3; ++order) {
        const double fd = (fe.eval(s + h, order) - fe.eval(s - h, order)) / (2 * h);
        const double ex = fe.eval(s, order + 1);
        CHECK(std::abs(fd - ex) <= 1e-6 * std::max(1.0, std::abs(ex)));
      }
    }
  }
}

TEST_CASE("clamped polynomial has bounded second derivative") {
  FreeEnergy dw;
  dw.kind = FreeEnergyKind::double_well;
  dw.clamp = std::array<double, 2>{-1.2, 1.2};
  CHECK(dw.eval(10.0, 2) == doctest::Approx(12 * 1.44 - 4));
  CHECK(dw.eval(-10.0, 3) == 0.0);
}

TEST_CASE("rate examples") {
  ReactionRate r = bv();
  r.k_ins = 2.0;
  r.k_ext = 3.0;
  r.mu_e = 0.4;
  CHECK(rate_eval(r, 0.3, 0.4) == doctest::Approx(2.0 - 0.9));

  ReactionRate lin;
  lin.kappa = 2.0;
  CHECK(rate_eval(lin, 0.5, 3.0) == doctest::Approx(-6.0));
  CHECK(g_eval(lin, 0.5, 3.0) == doctest::Approx(-9.0));

  // root of R(s, .) is -ln(s)/2; bisection cross-check
  ReactionRate b = bv();
  for (double s : {0.1, 0.5, 0.9}) {
    double lo = -5, hi = 5;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (b.rate(s, mid) > 0 ? lo : hi) = mid;
    }
    CHECK(lo == doctest::Approx(-0.5 * std::log(s)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rate_eval(b, 0.5, 800.0), RangeError);
}

TEST_CASE("G matches R and vanishes at zero") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> S(0.0, 1.0), W(-6.0, 6.0);
  ReactionRate lin;
  lin.kappa = 0.7;
  for (const ReactionRate& r : {bv(), tbv(), lin}) {
    for (int k = 0; k < 100; ++k) {
      const double s = S(rng), w = W(rng), h = 1e-5;
      CHECK(r.antiderivative(s, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
      const double fd = (r.antiderivative(s, w + h) - r.antiderivative(s, w - h)) / (2 * h);
      CHECK(std::abs(fd - r.rate(s, w)) <= 1e-6 * std::max(1.0, std::abs(r.rate(s, w))));
      const double fd2 = (r.rate(s, w + h) - r.rate(s, w - h)) / (2 * h);
      CHECK(std::abs(fd2 - r.rate_dw(s, w)) <= 1e-6 * std::max(1.0, std::abs(fd2)));
    }
  }
}

TEST_CASE("monotonicity and coercivity sampling") {
  ReactionRate lin;
  lin.kappa = 1.5;
  for (const ReactionRate& r : {tbv(), lin}) {
    const double C = r.monotonicity_constant(0.0);
    REQUIRE(C > 0.0);
    for (double s : {0.0, 0.4, 1.0}) {
      for (int a = 0; a < 100; ++a) {
        for (int b = 0; b < 100; ++b) {
          const double w1 = -10 + 0.2 * a, w2 = -10 + 0.2 * b + 0.1;
          const double lhs = (r.rate(s, w2) - r.rate(s, w1)) * (w2 - w1);
          CHECK(lhs <= -C * (w2 - w1) * (w2 - w1) * (1 - 1e-12));
        }
      }
    }
    const double Cc = r.coercivity_constant();
    for (double s : {0.0, 0.5, 1.0})
      for (int a = 0; a <= 400; ++a) {
        const double w = -20 + 0.1 * a;
        CHECK(-w * r.rate(s, w) >= w * w / Cc - Cc - 1e-12);
      }
  }
}

TEST_CASE("elastic parameter validation") {
  ElasticParams ep;
  ep.shear = 0.0;
  CHECK_THROWS_AS(ep.validate(), InvalidArgument);
  ep.shear = 1.0;
  ep.lambda = -1.0;
  CHECK_THROWS_AS(ep.validate(), InvalidArgument);
  ep.lambda = 1.0;
  ep.e0 = {0.1, 0.2, 0.3, 0.0};
  CHECK_THROWS_AS(ep.validate(), InvalidArgument);
}

TEST_CASE("total energy examples") {
  auto g = make_grid(1, {1.0, 0.0}, {65, 0});
  ModelParams p;
  p.free_energy = regular(3.0, 1.0);
  Field cbar = sample(g, [](double, double) { return 0.3; });
  CHECK(total_energy(cbar, nullptr, p) == doctest::Approx(p.free_energy.eval(0.3, 0)));

  ModelParams q;  // quadratic f, rho = 1
  double prev_err = 1.0;
  for (int n : {33, 65, 129}) {
    auto gn = make_grid(1, {1.0, 0.0}, {n, 0});
    Field c = sample(gn, [](double x, double) { return std::cos(M_PI * x); });
    const double err = std::abs(total_energy(c, nullptr, q) - (0.25 + M_PI * M_PI / 4));
    CHECK(err < prev_err / 3.5);
    prev_err = err;
  }
  CHECK(prev_err < 1e-3);
}

TEST_CASE("elastic energy vanishes for uniform eigenstrain relief") {
  auto g = make_grid(2, {1.0, 1.0}, {9, 9});
  ModelParams p;
  ElasticParams ep;
  ep.lambda = 1.3;
  ep.shear = 0.8;
  ep.e0 = {0.05, 0.0, 0.0, 0.05};
  p.elasticity = ep;
  const double cb = 0.4;
  Field c = sample(g, [&](double, double) { return cb; });
  Eigen::VectorXd u(2 * g->size());
  for (std::size_t k = 0; k < g->size(); ++k) {
    u[static_cast<Eigen::Index>(k)] = cb * 0.05 * g->x(k);
    u[static_cast<Eigen::Index>(g->size() + k)] = cb * 0.05 * g->y(k);
  }
  Field uf(g, u, 2);
  CHECK(std::abs(total_energy(c, &uf, p) - p.free_energy.eval(cb, 0)) < 1e-14);
  Field mu = chemical_potential(c, &uf, p);
  for (std::size_t k = 0; k < g->size(); ++k) CHECK(mu[k] == doctest::Approx(cb).epsilon(1e-12));
}

TEST_CASE("chemical potential examples") {
  ModelParams p;
  p.free_energy = regular(3.0, 1.0);
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  Field c = sample(g, [](double, double) { return 0.3; });
  Field mu = chemical_potential(c, nullptr, p);
  for (std::size_t k = 0; k < g->size(); ++k)
    CHECK(mu[k] == doctest::Approx(p.free_energy.eval(0.3, 1)));

  ModelParams q;
  double prev = 1.0;
  for (int n : {33, 65, 129}) {
    auto gn = make_grid(1, {1.0, 0.0}, {n, 0});
    Field cc = sample(gn, [](double x, double) { return std::cos(M_PI * x); });
    Field m = chemical_potential(cc, nullptr, q);
    double err = 0;
    for (std::size_t k = 0; k < gn->size(); ++k)
      err = std::max(err, std::abs(m[k] - (M_PI * M_PI + 1) * std::cos(M_PI * gn->x(k))));
    CHECK(err < prev / 3.5);
    prev = err;
  }
}

TEST_CASE("chemical potential is the scaled energy gradient") {
  ModelParams p;
  p.free_energy = regular(3.0, 1.0);
  p.rho = 0.7;
  ElasticParams ep;
  ep.e0 = {0.1, 0.02, 0.02, -0.05};
  p.elasticity = ep;
  auto g = make_grid(2, {1.0, 1.0}, {7, 7});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.2, 0.8), V(-0.1, 0.1);
  Eigen::VectorXd cv(g->size()), uv(2 * g->size());
  for (auto& v : cv) v = U(rng);
  for (auto& v : uv) v = V(rng);
  Field c(g, cv), u(g, uv, 2);
  Field mu = chemical_potential(c, &u, p);
  const double h = 1e-6;
  for (std::size_t k : {0ul, 10ul, 24ul, 48ul}) {
    Field cp = c, cm = c;
    cp[k] += h;
    cm[k] -= h;
    const double fd = (total_energy(cp, &u, p) - total_energy(cm, &u, p)) / (2 * h);
    CHECK(fd / g->quad_weights()[static_cast<Eigen::Index>(k)] ==
          doctest::Approx(mu[k]).epsilon(1e-6));
  }
}
