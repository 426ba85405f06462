#pragma once

#include "chrflow/gradientflow.hpp"
#include "chrflow/mesh.hpp"
#include "chrflow/physics.hpp"

#include <cmath>
#include <random>

namespace chr::fixtures {

inline FreeEnergy regular_solution(double omega = 3.0, double kt = 1.0) {
  FreeEnergy f;
  f.kind = FreeEnergyKind::regular_solution;
  f.omega = omega;
  f.kt = kt;
  return f;
}

inline ReactionRate unit_bv(RateKind kind = RateKind::butler_volmer) {
  ReactionRate r;
  r.kind = kind;
  r.k_ins = 1.0;
  r.k_ext = 1.0;
  r.beta = 1.0;
  r.mu_e = 0.0;
  return r;
}

/// Model used by the energy, mass-flux and cross-solver runs.
inline ModelParams reference_model() {
  ModelParams p;
  p.free_energy = regular_solution();
  p.rate = unit_bv(RateKind::truncated_bv);
  p.rho = 1.0;
  p.truncation = 50.0;
  return p;
}

/// c with R(c, f'(c)) = 0 by bisection.
inline double equilibrium_root(const FreeEnergy& fe, const ReactionRate& r) {
  double lo = 1e-6, hi = 1.0 - 1e-6;
  auto phi = [&](double c) { return r.rate(c, fe.eval(c, 1)); };
  const double flo = phi(lo);
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    ((phi(mid) > 0) == (flo > 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// 0.5 + a few cosine modes, values in [0.3, 0.7], zero normal derivative.
inline Field smooth_perturbation(const GridPtr& g, std::uint64_t seed, double amp = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double a[4];
  double total = 0;
  for (double& x : a) {
    x = U(rng);
    total += std::abs(x);
  }
  for (double& x : a) x *= amp / total;
  double b[4];
  for (double& x : b) x = U(rng);
  return sample(g, [&](double x, double y) {
    double s = 0.5;
    for (int k = 0; k < 4; ++k) {
      double m = std::cos((k + 1) * M_PI * x / g->length(0));
      if (g->dim() == 2) m = 0.5 * (m + std::cos((k + 1) * M_PI * y / g->length(1)) * b[k]);
      s += a[k] * m;
    }
    return s;
  });
}

}  // namespace chr::fixtures
