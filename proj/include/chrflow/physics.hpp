#pragma once

#include "chrflow/mesh.hpp"

#include <array>
#include <optional>
#include <string>

namespace chr {

enum class FreeEnergyKind { regular_solution, double_well, quadratic };

/// Chemical energy density f.
///
///   regular_solution: f(s) = omega s(1-s) + KT (s ln s + (1-s) ln(1-s)),
///                     evaluated on [eps_dom, 1 - eps_dom] only
///   double_well:      f(s) = (s^2 - 1)^2
///   quadratic:        f(s) = s^2 / 2
///
/// Polynomial kinds accept an optional clamp interval [s_lo, s_hi]; outside
/// it f is continued by its second-order Taylor polynomial, which gives
/// globally bounded f'' and f''' = 0.
struct FreeEnergy {
  FreeEnergyKind kind = FreeEnergyKind::quadratic;
  double omega = 0.0;
  double kt = 1.0;
  double eps_dom = 1e-9;
  std::optional<std::array<double, 2>> clamp;

  /// order 0..3 selects f, f', f'', f'''.
  double eval(double s, int order) const;
  void validate() const;
};

double f_eval(const FreeEnergy& fe, double s, int order);

enum class RateKind { butler_volmer, linear, truncated_bv };

/// Boundary reaction rate R(s, w) and its antiderivative G(s, w) = int_0^w R(s, r) dr.
///
///   butler_volmer: R = k_ins exp(beta (mu_e - w)) - k_ext s exp(beta (w - mu_e))
///   linear:        R = -kappa w
///   truncated_bv:  butler_volmer with both exponentials continued linearly
///                  (C^1) outside |w - mu_e| <= w_max
struct ReactionRate {
  RateKind kind = RateKind::linear;
  double k_ins = 1.0;
  double k_ext = 1.0;
  double beta = 1.0;
  double mu_e = 0.0;
  double kappa = 1.0;
  double w_max = 5.0;

  double rate(double s, double w) const;
  /// dR/dw
  double rate_dw(double s, double w) const;
  double antiderivative(double s, double w) const;

  /// C with (R(s,w2) - R(s,w1))(w2 - w1) <= -C |w2 - w1|^2 for s >= s_min.
  /// Zero when the kind is not uniformly monotone on that range.
  double monotonicity_constant(double s_min = 0.0) const;
  /// C with -w R(s,w) >= |w|^2 / C - C for s in [0, 1]; infinity when none.
  double coercivity_constant() const;
  bool strictly_monotone() const { return monotonicity_constant() > 0.0; }
  void validate() const;
};

double rate_eval(const ReactionRate& r, double s, double w);
double g_eval(const ReactionRate& r, double s, double w);

/// Isotropic plane stiffness C(xi) = 2 shear sym(xi) + lambda tr(xi) I and
/// lattice misfit e0 (row-major symmetric 2x2: e0[0]=xx, e0[1]=xy, e0[2]=yx, e0[3]=yy).
struct ElasticParams {
  double lambda = 1.0;
  double shear = 1.0;
  std::array<double, 4> e0{0.0, 0.0, 0.0, 0.0};

  std::array<double, 4> stress(const std::array<double, 4>& strain) const;
  /// C(a):b
  double contract(const std::array<double, 4>& a, const std::array<double, 4>& b) const;
  void validate() const;
};

struct ModelParams {
  FreeEnergy free_energy;
  ReactionRate rate;
  double rho = 1.0;
  std::optional<ElasticParams> elasticity;
  std::optional<double> truncation;  // alpha

  void validate() const;
};

/// I[c] (plus the elastic energy when `u` is given): trapezoidal quadrature of
/// f(c), the edge-difference Dirichlet form for rho/2 |grad c|^2, and nodal
/// quadrature of 1/2 C(e(u) - c e0):(e(u) - c e0) on each cell.
double total_energy(const Field& c, const Field* u, const ModelParams& p);

/// mu = -rho Lap_h c + f'(c) + C(c e0 - e(u)):e0 at every node. This is the
/// gradient of total_energy divided by the lumped mass.
Field chemical_potential(const Field& c, const Field* u, const ModelParams& p);

std::string to_string(FreeEnergyKind k);
std::string to_string(RateKind k);
FreeEnergyKind free_energy_kind_from_string(const std::string& s);
RateKind rate_kind_from_string(const std::string& s);

}  // namespace chr
