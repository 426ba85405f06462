#include "chrflow/physics.hpp"

#include "chrflow/errors.hpp"
#include "chrflow/operators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace chr {

namespace {

double raw_polynomial(FreeEnergyKind kind, double s, int order) {
  if (kind == FreeEnergyKind::quadratic) {
    switch (order) {
      case 0: return 0.5 * s * s;
      case 1: return s;
      case 2: return 1.0;
      default: return 0.0;
    }
  }
  // (s^2 - 1)^2
  switch (order) {
    case 0: return (s * s - 1.0) * (s * s - 1.0);
    case 1: return 4.0 * s * (s * s - 1.0);
    case 2: return 12.0 * s * s - 4.0;
    default: return 24.0 * s;
  }
}

// Linear continuation of exp outside [-zm, zm].
double exp_cont(double z, double zm) {
  if (z > zm) return std::exp(zm) * (1.0 + (z - zm));
  if (z < -zm) return std::exp(-zm) * (1.0 + (z + zm));
  return std::exp(z);
}

double exp_cont_dz(double z, double zm) {
  if (z > zm) return std::exp(zm);
  if (z < -zm) return std::exp(-zm);
  return std::exp(z);
}

// Antiderivative of exp_cont, continuous and equal to exp(z) on [-zm, zm].
double exp_cont_int(double z, double zm) {
  if (z > zm) {
    const double d = z - zm;
    return std::exp(zm) * (1.0 + d + 0.5 * d * d);
  }
  if (z < -zm) {
    const double d = z + zm;
    return std::exp(-zm) * (1.0 + d + 0.5 * d * d);
  }
  return std::exp(z);
}

double checked_exponent(double beta, double w, double mu_e) {
  const double z = beta * (w - mu_e);
  if (!(std::abs(z) <= 700.0)) {
    std::ostringstream msg;
    msg << "butler_volmer: |beta (w - mu_e)| = " << std::abs(z) << " exceeds 700";
    throw RangeError(msg.str());
  }
  return z;
}

}  // namespace

// -------------------------------------------------------------------- f

void FreeEnergy::validate() const {
  if (kind == FreeEnergyKind::regular_solution) {
    if (!(kt > 0.0)) throw InvalidArgument("free_energy.kt must be positive");
    if (!(eps_dom > 0.0 && eps_dom < 0.5))
      throw InvalidArgument("free_energy.eps_dom must lie in (0, 1/2)");
    if (clamp) throw InvalidArgument("free_energy.clamp applies to polynomial kinds only");
  }
  if (clamp && !((*clamp)[0] < (*clamp)[1]))
    throw InvalidArgument("free_energy.clamp must satisfy s_lo < s_hi");
}

double FreeEnergy::eval(double s, int order) const {
  if (order < 0 || order > 3) throw InvalidArgument("f_eval: order must be 0..3");
  if (!std::isfinite(s)) throw DomainError("f_eval: non-finite argument");
  if (kind == FreeEnergyKind::regular_solution) {
    if (s < eps_dom || s > 1.0 - eps_dom) {
      std::ostringstream msg;
      msg << "regular_solution: s = " << s << " outside [" << eps_dom << ", " << 1.0 - eps_dom
          << "]";
      throw DomainError(msg.str());
    }
    const double t = 1.0 - s;
    switch (order) {
      case 0: return omega * s * t + kt * (s * std::log(s) + t * std::log(t));
      case 1: return omega * (1.0 - 2.0 * s) + kt * (std::log(s) - std::log(t));
      case 2: return -2.0 * omega + kt * (1.0 / s + 1.0 / t);
      default: return kt * (-1.0 / (s * s) + 1.0 / (t * t));
    }
  }
  if (clamp) {
    const double lo = (*clamp)[0];
    const double hi = (*clamp)[1];
    if (s < lo || s > hi) {
      const double a = s < lo ? lo : hi;
      const double d = s - a;
      const double f0 = raw_polynomial(kind, a, 0);
      const double f1 = raw_polynomial(kind, a, 1);
      const double f2 = raw_polynomial(kind, a, 2);
      switch (order) {
        case 0: return f0 + f1 * d + 0.5 * f2 * d * d;
        case 1: return f1 + f2 * d;
        case 2: return f2;
        default: return 0.0;
      }
    }
  }
  return raw_polynomial(kind, s, order);
}

double f_eval(const FreeEnergy& fe, double s, int order) { return fe.eval(s, order); }

// -------------------------------------------------------------------- R

void ReactionRate::validate() const {
  switch (kind) {
    case RateKind::linear:
      if (!(kappa >= 0.0)) throw InvalidArgument("rate.kappa must be non-negative");
      break;
    case RateKind::truncated_bv:
      if (!(w_max > 0.0)) throw InvalidArgument("rate.w_max must be positive");
      [[fallthrough]];
    case RateKind::butler_volmer:
      if (!(k_ins > 0.0)) throw InvalidArgument("rate.k_ins must be positive");
      if (!(k_ext > 0.0)) throw InvalidArgument("rate.k_ext must be positive");
      if (!(beta > 0.0)) throw InvalidArgument("rate.beta must be positive");
      if (!std::isfinite(mu_e)) throw InvalidArgument("rate.mu_e must be finite");
      break;
  }
}

double ReactionRate::rate(double s, double w) const {
  switch (kind) {
    case RateKind::linear:
      return -kappa * w;
    case RateKind::butler_volmer: {
      const double z = checked_exponent(beta, w, mu_e);
      return k_ins * std::exp(-z) - k_ext * s * std::exp(z);
    }
    case RateKind::truncated_bv: {
      const double z = beta * (w - mu_e);
      const double zm = beta * w_max;
      return k_ins * exp_cont(-z, zm) - k_ext * s * exp_cont(z, zm);
    }
  }
  return 0.0;
}

double ReactionRate::rate_dw(double s, double w) const {
  switch (kind) {
    case RateKind::linear:
      return -kappa;
    case RateKind::butler_volmer: {
      const double z = checked_exponent(beta, w, mu_e);
      return -beta * (k_ins * std::exp(-z) + k_ext * s * std::exp(z));
    }
    case RateKind::truncated_bv: {
      const double z = beta * (w - mu_e);
      const double zm = beta * w_max;
      return -beta * (k_ins * exp_cont_dz(-z, zm) + k_ext * s * exp_cont_dz(z, zm));
    }
  }
  return 0.0;
}

double ReactionRate::antiderivative(double s, double w) const {
  switch (kind) {
    case RateKind::linear:
      return -0.5 * kappa * w * w;
    case RateKind::butler_volmer: {
      const double z = checked_exponent(beta, w, mu_e);
      const double z0 = -beta * mu_e;
      return k_ins / beta * (std::exp(-z0) - std::exp(-z)) -
             k_ext * s / beta * (std::exp(z) - std::exp(z0));
    }
    case RateKind::truncated_bv: {
      const double z = beta * (w - mu_e);
      const double z0 = -beta * mu_e;
      const double zm = beta * w_max;
      return k_ins / beta * (exp_cont_int(-z0, zm) - exp_cont_int(-z, zm)) -
             k_ext * s / beta * (exp_cont_int(z, zm) - exp_cont_int(z0, zm));
    }
  }
  return 0.0;
}

double ReactionRate::monotonicity_constant(double s_min) const {
  switch (kind) {
    case RateKind::linear:
      return kappa;
    case RateKind::truncated_bv:
      // dR/dw <= -beta (k_ins + k_ext s) exp(-beta w_max)
      return beta * (k_ins + k_ext * std::max(s_min, 0.0)) * std::exp(-beta * w_max);
    case RateKind::butler_volmer:
      // k_ins e^{-z} + k_ext s e^{z} >= 2 sqrt(k_ins k_ext s)
      return 2.0 * beta * std::sqrt(k_ins * k_ext * std::max(s_min, 0.0));
  }
  return 0.0;
}

double ReactionRate::coercivity_constant() const {
  const double inf = std::numeric_limits<double>::infinity();
  switch (kind) {
    case RateKind::linear:
      return kappa > 0.0 ? 1.0 / kappa : inf;
    case RateKind::truncated_bv: {
      // -w R >= C1 w^2 - R0 |w| >= C1/2 w^2 - R0^2 / (2 C1)
      const double c1 = monotonicity_constant(0.0);
      const double zm = beta * w_max;
      const double r0 = k_ins * std::abs(exp_cont(beta * mu_e, zm)) +
                        k_ext * std::abs(exp_cont(-beta * mu_e, zm));
      return std::max(2.0 / c1, r0 * r0 / (2.0 * c1));
    }
    case RateKind::butler_volmer:
      return inf;
  }
  return inf;
}

double rate_eval(const ReactionRate& r, double s, double w) { return r.rate(s, w); }
double g_eval(const ReactionRate& r, double s, double w) { return r.antiderivative(s, w); }

// -------------------------------------------------------------------- C

void ElasticParams::validate() const {
  if (!(shear > 0.0)) throw InvalidArgument("elasticity.shear must be positive");
  if (!(lambda + shear > 0.0)) throw InvalidArgument("elasticity: lambda + shear must be positive");
  if (e0[1] != e0[2]) throw InvalidArgument("elasticity.e0 must be symmetric");
  for (double v : e0)
    if (!std::isfinite(v)) throw InvalidArgument("elasticity.e0 must be finite");
}

std::array<double, 4> ElasticParams::stress(const std::array<double, 4>& e) const {
  const double tr = e[0] + e[3];
  return {2.0 * shear * e[0] + lambda * tr, shear * (e[1] + e[2]), shear * (e[1] + e[2]),
          2.0 * shear * e[3] + lambda * tr};
}

double ElasticParams::contract(const std::array<double, 4>& a,
                               const std::array<double, 4>& b) const {
  const auto s = stress(a);
  return s[0] * b[0] + s[1] * b[1] + s[2] * b[2] + s[3] * b[3];
}

void ModelParams::validate() const {
  free_energy.validate();
  rate.validate();
  if (!(rho > 0.0)) throw InvalidArgument("rho must be positive");
  if (elasticity) elasticity->validate();
  if (truncation && !(*truncation > 0.0)) throw InvalidArgument("truncation must be positive");
}

// -------------------------------------------------------------------- energy

namespace {

void check_elastic_args(const Field& c, const Field* u, const ModelParams& p) {
  if (static_cast<bool>(u) != p.elasticity.has_value())
    throw InvalidArgument("displacement must be given iff elasticity is configured");
  if (u) {
    if (c.grid().dim() != 2) throw InvalidArgument("elasticity requires a 2D grid");
    if (u->components() != 2 || !(u->grid() == c.grid()))
      throw InvalidArgument("displacement must be a 2-component field on the same grid");
  }
}

}  // namespace

double total_energy(const Field& c, const Field* u, const ModelParams& p) {
  c.require_scalar();
  check_elastic_args(c, u, p);
  const Grid& g = c.grid();
  const auto& w = g.quad_weights();
  double bulk = 0.0;
  for (Eigen::Index k = 0; k < c.values().size(); ++k) {
    try {
      bulk += w[k] * p.free_energy.eval(c.values()[k], 0);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), static_cast<long>(k));
    }
  }
  const SparseMatrix K = stiffness_matrix(g);
  const double grad = 0.5 * p.rho * c.values().dot(K * c.values());
  double el = 0.0;
  if (u) el = ElasticOperator(c.grid_ptr(), *p.elasticity).energy(c.values(), u->values());
  return bulk + grad + el;
}

Field chemical_potential(const Field& c, const Field* u, const ModelParams& p) {
  c.require_scalar();
  check_elastic_args(c, u, p);
  const Grid& g = c.grid();
  Eigen::VectorXd mu = p.rho * laplacian(c).values() * -1.0;
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    try {
      mu[k] += p.free_energy.eval(c.values()[k], 1);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), static_cast<long>(k));
    }
  }
  if (u) {
    const ElasticOperator el(c.grid_ptr(), *p.elasticity);
    mu += el.grad_c(c.values(), u->values()).cwiseQuotient(g.quad_weights());
  }
  return Field(c.grid_ptr(), std::move(mu));
}

// -------------------------------------------------------------------- names

std::string to_string(FreeEnergyKind k) {
  switch (k) {
    case FreeEnergyKind::regular_solution: return "regular_solution";
    case FreeEnergyKind::double_well: return "double_well";
    case FreeEnergyKind::quadratic: return "quadratic";
  }
  return "?";
}

std::string to_string(RateKind k) {
  switch (k) {
    case RateKind::butler_volmer: return "butler_volmer";
    case RateKind::linear: return "linear";
    case RateKind::truncated_bv: return "truncated_bv";
  }
  return "?";
}

FreeEnergyKind free_energy_kind_from_string(const std::string& s) {
  if (s == "regular_solution") return FreeEnergyKind::regular_solution;
  if (s == "double_well") return FreeEnergyKind::double_well;
  if (s == "quadratic") return FreeEnergyKind::quadratic;
  throw InvalidArgument("unknown free energy kind '" + s + "'");
}

RateKind rate_kind_from_string(const std::string& s) {
  if (s == "butler_volmer") return RateKind::butler_volmer;
  if (s == "linear") return RateKind::linear;
  if (s == "truncated_bv") return RateKind::truncated_bv;
  throw InvalidArgument("unknown rate kind '" + s + "'");
}

}  // namespace chr
