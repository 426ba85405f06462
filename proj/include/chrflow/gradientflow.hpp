#pragma once

#include "chrflow/mesh.hpp"
#include "chrflow/operators.hpp"
#include "chrflow/physics.hpp"

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace chr {

/// Uniform time steps tau = T / n on [0, T].
struct TimeGrid {
  double T = 1.0;
  int n = 1;

  double tau() const { return n > 0 ? T / n : 0.0; }
  double time(int i) const { return n > 0 ? T * i / n : 0.0; }
  /// Requires T > 0 and n >= 1 (n >= 0 when `allow_empty`).
  void validate(bool allow_empty = false) const;
};

struct State {
  Field c;
  Field mu;
  std::optional<Field> u;
  double t = 0.0;
};

struct StepReport {
  int i = 0;
  double t = 0.0;
  double energy = 0.0;
  double astar = 0.0;
  double aanchor = 0.0;
  double mass = 0.0;
  double flux = 0.0;
  int newton_iters = 0;
  double max_residual = 0.0;
  bool fallback = false;
  /// I[c^{i-1}] - (I[c^i] + tau (A* + A_anchor)); non-negative for a minimizer.
  double step_slack = 0.0;
  /// I[c^0] - (I[c^i] + sum_k tau (A*_k + A_anchor_k)).
  double telescoped_slack = 0.0;
  bool energy_ok = true;

  // filled by the strong pathway only
  double strong_residual = 0.0;
  bool detrunc_ok = true;
};

struct StrongInfo {
  int outer_iters = 0;
  std::vector<double> contraction;  // |v_{k+1} - v_k| / |v_k - v_{k-1}|
  std::vector<double> increments;   // |v_{k+1} - v_k|
  bool detrunc_ok = true;
};

struct Trajectory {
  std::vector<State> states;
  std::vector<StepReport> reports;
  TimeGrid tg;
  std::string params_hash;
  double energy0 = 0.0;  // I[c^0]
  std::optional<StrongInfo> strong;
  /// Set when a step failed; `states` then holds the accepted prefix.
  std::optional<std::string> error;
};

/// Stable hex digest of every model parameter.
std::string params_hash(const ModelParams& p);

/// 1/2 v^T K v - int_Gamma G(c, v).
double functional_A(const Field& c, const Field& v, const ReactionRate& r);

struct AstarResult {
  double value = 0.0;
  Field mu;
  int iterations = 0;
  double residual = 0.0;
};

/// A*_c(v*) at its maximizer mu = bbar(c, v*).
AstarResult conjugate_Astar(const Field& c, const Field& vstar, const ReactionRate& r,
                            const NewtonConfig& newton = {});

/// I[c] + tau A*_{c_prev}(-(c - c_prev) / tau), with the displacement
/// relaxed when elasticity is on.
double mm_objective(const Field& c, const Field& c_prev, double tau, const ModelParams& p,
                    const NewtonConfig& newton = {});

struct WeakOptions {
  NewtonConfig newton;
  int fallback_iters = 200;
  double energy_tol = 1e-8;      // per-step slack allowance, relative to |I[c0]|
  double telescoped_tol = 1e-6;  // per-step telescoped allowance, relative to |I[c0]|
};

/// One implicit step: Newton on the stacked (c, mu[, u]) system with a
/// gradient-descent fallback on mm_objective. `energy0` is I[c^0] for the
/// telescoped slack and `dissipated` the running sum of tau (A* + A_anchor);
/// pass 0 for a single step.
std::pair<State, StepReport> mm_step(const State& prev, const TimeGrid& tg, const ModelParams& p,
                                     const WeakOptions& opt = {}, double energy0 = NAN,
                                     double dissipated = 0.0);

/// Initial state with diagnostic mu^0 and, when configured, the relaxed u^0.
State initial_state(const Field& c0, const ModelParams& p);

Trajectory run_weak(const Field& c0, const TimeGrid& tg, const ModelParams& p,
                    const WeakOptions& opt = {});

/// Rows `i,t,energy,Astar,Aanchor,mass,flux,newton_iters,max_residual`, plus
/// `outer_iter,contraction_ratio,detrunc_ok` for strong trajectories. Row 0
/// describes the initial state.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace chr
