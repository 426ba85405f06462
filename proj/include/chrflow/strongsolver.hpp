#pragma once

#include "chrflow/gradientflow.hpp"
#include "chrflow/mesh.hpp"
#include "chrflow/operators.hpp"
#include "chrflow/physics.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace chr {

/// Odd C^2 cut-off: psi(x) = x on [-alpha, alpha]; on [alpha, alpha + 1]
/// psi' = 1 - S(x - alpha) with the quintic smoothstep S; constant
/// alpha + 1/2 beyond.
struct Truncation {
  double alpha = 1.0;

  double psi(double x, int order = 0) const;
  void validate() const;
};

double psi_eval(const Truncation& tr, double x, int order);

/// Nodal f'''(c) |Psi(grad_h c)|^2 + f''(c) psi(Lap_h c), with Psi acting
/// componentwise on the gradient.
Field truncated_laplacian_fprime(const Field& c, const FreeEnergy& fe, const Truncation& tr);

/// The same expression without the cut-off.
Field laplacian_fprime(const Field& c, const FreeEnergy& fe);

/// -R(s, -w + f'(s)).
double script_R(const ReactionRate& r, const FreeEnergy& fe, double s, double w);

/// Data of  c_t + div(L grad(div(L grad c))) = g  with
/// (L grad c).nu = alpha_bc and (L grad div(L grad c)).nu = beta_bc.
/// Boundary callbacks return one value per Grid::boundary() entry; empty
/// callbacks mean zero data.
struct BiharmonicData {
  std::function<Field(double t)> g;
  std::function<std::vector<double>(double t)> alpha_bc;
  std::function<std::vector<double>(double t)> beta_bc;
  Conductivity lambda;
};

/// Implicit Euler for the mixed form w = -div(L grad c):
///   (W/tau + K W^{-1} K) c = W c_prev / tau + W g - W_b beta + K W^{-1} W_b alpha
/// with the factorization kept for repeated steps.
class BiharmonicStepper {
 public:
  BiharmonicStepper(GridPtr grid, double tau, const Conductivity& lambda = {});

  Field step(const Field& c_prev, const Eigen::VectorXd& g, const std::vector<double>& alpha_bc,
             const std::vector<double>& beta_bc) const;
  /// W-weighted residual of the step equation for a candidate c.
  Eigen::VectorXd residual(const Field& c, const Field& c_prev, const Eigen::VectorXd& g,
                           const std::vector<double>& alpha_bc,
                           const std::vector<double>& beta_bc) const;

  double tau() const { return tau_; }
  const SparseMatrix& stiffness() const { return k_; }

 private:
  Eigen::VectorXd rhs(const Field& c_prev, const Eigen::VectorXd& g,
                      const std::vector<double>& alpha_bc, const std::vector<double>& beta_bc) const;

  GridPtr grid_;
  double tau_;
  SparseMatrix k_;
  SparseMatrix m_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

/// One step from c_prev at time t_new - tau to t_new.
Field biharmonic_step(const Field& c_prev, const BiharmonicData& data, double tau, double t_new);

struct CompatibilityReport {
  bool ok = false;
  bool level0_ok = false;
  bool level1_ok = true;
  double tol0 = 0.0;
  double tol1 = 0.0;
  std::vector<double> residual0;  // per boundary entry
  std::vector<double> residual1;  // per boundary entry (level 1 only)
};

/// Level 0: one-sided d_nu c0 = 0 within 1e-8 + h^2 max|Lap_h c0|.
/// Level 1 adds d_nu(Lap c0) = script_R(c0, Lap c0) within
/// 1e-8 + 2 h^2 max|D^3 Lap_h c0| (interior Laplacians extrapolated to the face
/// by a quadratic; D^3 is the third difference quotient).
CompatibilityReport compatibility_check(const Field& c0, const ModelParams& p, int level);

struct PicardOptions {
  double tol = 1e-8;
  int max_outer = 60;
  int compat_level = 1;
  /// Start from a lagged-data march instead of the constant trajectory.
  bool lagged_start = true;
  bool verbose = false;
};

/// Whole-trajectory fixed-point iteration for the truncated strong model
/// (rho = 1, alpha from p.truncation). Each sweep freezes v and solves the
/// linear biharmonic problem with g = (Lap f')_alpha(v_i) and
/// beta = script_R(v_i, Lap_h v_i) at the new time level. Stops once
/// the iterate difference in L^2(0,T; H^2_h) is below tol and the per-step
/// nodal residual is at most 10 tol.
Trajectory picard_solve(const Field& c0, const ModelParams& p, const TimeGrid& tg,
                        const PicardOptions& opt = {});

/// Per-step nodal residual of the strong model at a trajectory, truncated
/// or not.
std::vector<double> strong_residuals(const Trajectory& traj, const ModelParams& p, bool truncated);

struct DetruncationResult {
  bool ok = true;
  std::optional<std::pair<int, std::size_t>> first_violation;  // (state index, node)
  double max_gradient = 0.0;
  double max_laplacian = 0.0;
};

/// True iff every state keeps |grad_h c| and |Lap_h c| strictly below alpha.
DetruncationResult detruncate_check(const Trajectory& traj, const Truncation& tr);

}  // namespace chr
