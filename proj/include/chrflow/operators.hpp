#pragma once

#include "chrflow/mesh.hpp"
#include "chrflow/physics.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace chr {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Constant SPD diffusion tensor. In 1D only `xx` is used.
struct Conductivity {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  static Conductivity identity() { return {}; }
  bool is_identity() const { return xx == 1.0 && xy == 0.0 && yy == 1.0; }
  /// Throws InvalidArgument unless SPD.
  void validate(int dim) const;
};

/// Symmetric PSD matrix K of the discrete form int Lambda grad u . grad v.
///
/// Axis-aligned parts are edge-difference sums weighted by the trapezoid rule
/// across the edge, which reproduces the 5-point stencil with ghost-node
/// reflection; the off-diagonal part uses cell-averaged gradients. The kernel
/// is exactly the constants, and -W^{-1} K is the Neumann Laplacian.
SparseMatrix stiffness_matrix(const Grid& g, const Conductivity& lambda = {});

/// Nodal vector sum_e weight_e * data_e over boundary entries (a boundary
/// quadrature source). `face_data` is indexed like Grid::boundary().
Eigen::VectorXd boundary_source(const Grid& g, const std::vector<double>& face_data);

/// Per-entry values of a nodal field (corners repeat once per face).
std::vector<double> boundary_values(const Field& f);

/// div(Lambda grad f) with (Lambda grad f).nu = 0 on every face.
Field laplacian(const Field& f, const Conductivity& lambda = {});

/// div(Lambda grad f) where the co-normal flux (Lambda grad f).nu on each
/// face entry is `flux` (weak boundary source, no stencil change).
Field laplacian_with_flux(const Field& f, const Conductivity& lambda,
                          const std::vector<double>& flux);

/// Second-order one-sided outward normal derivative at every boundary entry.
std::vector<double> normal_derivative(const Field& f);

/// Centered gradient component along `axis`; one-sided second order on the
/// faces normal to that axis.
Field gradient_component(const Field& f, int axis);

/// Mean-zero v with -div(Lambda grad v) = g and zero co-normal flux.
/// Rejects g whose integral exceeds 1e-10 * ||g||.
Field solve_neumann_poisson(const Field& g, const Conductivity& lambda = {});

/// Discrete H^1 norm sqrt(f^T (K + W) f).
double h1_norm(const Field& f);

/// Dual norm of H^1: solve (K + W) z = W g and return sqrt(g^T W z).
double dual_h1_norm(const Field& g);
/// The Riesz representer z of dual_h1_norm.
Field dual_h1_representer(const Field& g);

struct NewtonConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iter = 50;
  double backtrack = 0.5;
  double armijo = 1e-4;
  bool verbose = false;

  void validate() const;
};

/// Weak form of B_c(v): K v - W_b R(c, v) as a nodal vector.
Eigen::VectorXd apply_b(const Field& c, const Field& v, const ReactionRate& r);

struct BbarResult {
  Field mu;
  int iterations = 0;
  double residual = 0.0;
};

/// Solve K mu - W_b R(c, mu) = W vstar (i.e. -Lap mu = vstar, d_nu mu = R(c, mu))
/// by damped Newton with a Picard fallback on the Robin term. Only the
/// boundary values of `c` are read. A linear rate with kappa = 0 is the
/// pure Neumann problem and returns the mean-zero solution.
BbarResult bbar(const Field& c, const Field& vstar, const ReactionRate& r,
                const NewtonConfig& newton = {}, const Field* guess = nullptr);

/// Plane elasticity with nodal eigenstrain coupling.
///
/// Displacements are bilinear per cell; the energy
///   1/2 int C(e(u) - c e0):(e(u) - c e0)
/// is integrated with the 4-corner (trapezoid) rule on each cell, so the
/// strain at a corner uses the two cell edges meeting there. With this rule
/// the per-cell kernel is exactly the rigid motions, and c enters only at
/// nodes:
///   E(c, u) = 1/2 u^T A u - c^T B u + 1/2 c^T D c,  D diagonal.
class ElasticOperator {
 public:
  ElasticOperator(GridPtr grid, const ElasticParams& ep);

  const SparseMatrix& stiffness() const { return a_; }
  const SparseMatrix& coupling() const { return b_; }
  const Eigen::VectorXd& diag() const { return d_; }
  /// 3 x 2N rows: mean u_x, mean u_y, mean curl u.
  const SparseMatrix& constraints() const { return c_; }

  double energy(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const;
  /// dE/dc (weak, not divided by the mass).
  Eigen::VectorXd grad_c(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const;
  /// dE/du = A u - B^T c (the weak stress residual).
  Eigen::VectorXd grad_u(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const;
  /// Largest |C(e(u) - c e0)| entry over all cell corners.
  double max_stress(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const;

  Eigen::VectorXd solve(const Eigen::VectorXd& c) const;

  const Grid& grid() const { return *grid_; }

 private:
  GridPtr grid_;
  ElasticParams ep_;
  SparseMatrix a_, b_, c_;
  SparseMatrix strain_;  // 3 rows per corner sample (exx, eyy, gamma_xy)
  Eigen::VectorXd corner_w_;
  std::vector<std::size_t> corner_node_;
  Eigen::VectorXd d_;
};

/// Displacement (2-component field) with int C(e(u) - c e0):e(psi) = 0 for all
/// nodal psi, gauge-fixed by zero mean displacement and zero mean curl.
Field solve_elasticity(const Field& c, const ElasticParams& ep);

}  // namespace chr
