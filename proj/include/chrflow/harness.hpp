#pragma once

#include "chrflow/gradientflow.hpp"
#include "chrflow/mesh.hpp"
#include "chrflow/physics.hpp"
#include "chrflow/strongsolver.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace chr {

// ------------------------------------------------------------------ scenarios

/// Root of R(c, f'(c)) = 0 on (0, 1) by bisection.
double equilibrium_root(const FreeEnergy& fe, const ReactionRate& r);

/// base + random cosine modes with zero normal derivative; the absolute
/// mode amplitudes sum to `amplitude`.
Field random_perturbation(const GridPtr& g, double base, double amplitude, std::uint64_t seed);

/// base + amplitude (1 - cos 2 pi x)^2 (times the same factor in y in 2D).
Field bump_field(const GridPtr& g, double base, double amplitude);

/// Regular-solution f (omega 3, KT 1), truncated Butler-Volmer rate with
/// k_ins = k_ext = beta = 1, mu_e = 0, rho = 1, truncation 50.
ModelParams reference_model();

// ------------------------------------------------------------------ config

struct InitialSpec {
  /// constant | equilibrium | perturbation | bump | cosine
  std::string kind = "constant";
  double base = 0.5;
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

struct RunConfig {
  int dim = 1;
  std::array<double, 2> extent{1.0, 0.0};
  std::array<int, 2> nodes{65, 0};
  ModelParams model;
  TimeGrid time{0.05, 50};
  /// weak | strong | manufactured
  std::string solver = "weak";
  WeakOptions weak;
  PicardOptions picard;
  InitialSpec initial;
  std::string trajectory_path = "trajectory.csv";
  std::string snapshot_dir;
  int snapshot_stride = 0;
  bool check_detruncation = true;
  std::uint64_t seed = 0;

  GridPtr grid() const;
  Field initial_field() const;
};

/// Parses and validates a JSON config; unknown keys and invalid values raise
/// ConfigError naming the key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Resolved config (defaults filled) as pretty JSON.
std::string config_to_json(const RunConfig& cfg);

// ------------------------------------------------------------------ run

struct RunOutcome {
  int exit_code = 0;
  Trajectory trajectory;
  std::string diagnostic;  // JSON payload on failure
};

/// Runs the configured solver and writes the trajectory CSV and snapshots.
/// Exit codes: 0 success, 3 solver failure (prefix written when available).
RunOutcome run(const RunConfig& cfg);

// ------------------------------------------------------------------ verify

struct Check {
  std::string name;
  double s = NAN;
  double T = NAN;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;

  double margin() const { return rhs - lhs; }
};

/// lhs <= rhs
Check make_check(std::string name, double lhs, double rhs, double s = NAN, double T = NAN);

struct VerifyReport {
  std::string suite;
  std::vector<Check> checks;

  bool ok() const;
  void append(const std::vector<Check>& more);
  /// `check,s,T,lhs,rhs,margin,pass`
  void write_csv(std::ostream& os) const;
  void write_text(std::ostream& os) const;
};

/// Suites: physics, operators, gradientflow, strongsolver, sobolev, all.
VerifyReport verify(const std::string& suite, std::uint64_t seed);

// ------------------------------------------------------------------ converge

struct ConvergeRow {
  int level = 0;
  double param = 0.0;  // h, tau or T
  double error = 0.0;  // vs exact solution when known, else vs next level
  double diff = NAN;   // vs next level
  double order = NAN;  // local order from successive differences
  double extra = NAN;  // picard: contraction ratio
};

struct ConvergeResult {
  std::string kind;
  std::vector<ConvergeRow> rows;
  double order = NAN;  // least-squares slope of log diff vs log param
  bool monotone = true;

  void write_csv(std::ostream& os) const;
};

/// kind: space | time | picard. `threads` caps concurrent levels (0 = use
/// CHRFLOW_THREADS or hardware concurrency).
ConvergeResult converge(const std::string& kind, const RunConfig& cfg, int levels, int threads = 0);

/// Manufactured biharmonic error study on the unit interval at final time T:
/// c = e^{-t} cos(pi x). Returns the max-norm error vs the exact solution.
double manufactured_error(int nodes, double tau, double T);

// ------------------------------------------------------------------ acceptance

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  double budget = 0.0;  // seconds, 0 = none
  std::string detail;
  std::vector<Check> checks;
};

/// Shared configuration of the energy, mass-flux and cross-solver checks.
RunConfig energy_config(std::uint64_t seed);
/// Initial data and model of the smallness-trend check.
RunConfig smallness_config();

CriterionResult run_criterion(int id, std::uint64_t seed);

}  // namespace chr
