#include "chrflow/strongsolver.hpp"

#include "chrflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace chr {

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double smoothstep(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double smoothstep_int(double t) { return t * t * t * t * (2.5 + t * (-3.0 + t)); }

double f_at(const FreeEnergy& fe, double s, int order, std::size_t node) {
  try {
    return fe.eval(s, order);
  } catch (const DomainError& e) {
    throw DomainError(e.what(), static_cast<long>(node));
  }
}

// Laplacian-of-f' with an optional cut-off.
Field lap_fprime(const Field& c, const FreeEnergy& fe, const Truncation* tr) {
  c.require_scalar();
  const Grid& g = c.grid();
  const Field lap = laplacian(c);
  std::vector<Field> grad;
  for (int a = 0; a < g.dim(); ++a) grad.push_back(gradient_component(c, a));
  Eigen::VectorXd out(c.values().size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double g2 = 0.0;
    for (const Field& d : grad) {
      const double v = tr ? tr->psi(d[k]) : d[k];
      g2 += v * v;
    }
    const double l = tr ? tr->psi(lap[k]) : lap[k];
    out[static_cast<Eigen::Index>(k)] =
        f_at(fe, c[k], 3, k) * g2 + f_at(fe, c[k], 2, k) * l;
  }
  return Field(c.grid_ptr(), std::move(out));
}

std::vector<double> reaction_datum(const Field& v, const Field& lap_v, const ModelParams& p) {
  std::vector<double> beta;
  beta.reserve(v.grid().boundary().size());
  for (const auto& e : v.grid().boundary())
    beta.push_back(script_R(p.rate, p.free_energy, v[e.node], lap_v[e.node]));
  return beta;
}

// L^2(0,T; H^2_h) distance of two trajectories with equal first states.
double trajectory_distance(const std::vector<Field>& a, const std::vector<Field>& b, double tau,
                           const SparseMatrix& K) {
  double s = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const Field d(a[i].grid_ptr(), a[i].values() - b[i].values());
    const Eigen::VectorXd& w = d.grid().quad_weights();
    const Field ld = laplacian(d);
    s += tau * (w.dot(d.values().cwiseAbs2()) + d.values().dot(K * d.values()) +
                w.dot(ld.values().cwiseAbs2()));
  }
  return std::sqrt(s);
}

}  // namespace

void Truncation::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("truncation must be positive");
}

double Truncation::psi(double x, int order) const {
  const double ax = std::abs(x);
  if (ax <= alpha) return order == 0 ? x : 1.0;
  const double sgn = x < 0.0 ? -1.0 : 1.0;
  if (ax >= alpha + 1.0) return order == 0 ? sgn * (alpha + 0.5) : 0.0;
  const double t = ax - alpha;
  if (order == 0) return sgn * (alpha + t - smoothstep_int(t));
  return 1.0 - smoothstep(t);
}

double psi_eval(const Truncation& tr, double x, int order) {
  if (order < 0 || order > 1) throw InvalidArgument("psi_eval: order must be 0 or 1");
  return tr.psi(x, order);
}

Field truncated_laplacian_fprime(const Field& c, const FreeEnergy& fe, const Truncation& tr) {
  tr.validate();
  return lap_fprime(c, fe, &tr);
}

Field laplacian_fprime(const Field& c, const FreeEnergy& fe) { return lap_fprime(c, fe, nullptr); }

double script_R(const ReactionRate& r, const FreeEnergy& fe, double s, double w) {
  return -r.rate(s, -w + fe.eval(s, 1));
}

// ------------------------------------------------------------------ stepper

BiharmonicStepper::BiharmonicStepper(GridPtr grid, double tau, const Conductivity& lambda)
    : grid_(std::move(grid)), tau_(tau) {
  if (!(tau > 0.0)) throw InvalidArgument("biharmonic_step: tau must be positive");
  k_ = stiffness_matrix(*grid_, lambda);
  const Eigen::VectorXd& w = grid_->quad_weights();
  SparseMatrix winv(k_.rows(), k_.cols());
  winv.setIdentity();
  for (Eigen::Index k = 0; k < w.size(); ++k) winv.coeffRef(k, k) = 1.0 / w[k];
  SparseMatrix mass(k_.rows(), k_.cols());
  mass.setIdentity();
  for (Eigen::Index k = 0; k < w.size(); ++k) mass.coeffRef(k, k) = w[k] / tau;
  m_ = SparseMatrix(mass + k_ * winv * k_);
  ldlt_.compute(m_);
  if (ldlt_.info() != Eigen::Success)
    throw SolverError("biharmonic_step: factorization failed", INFINITY);
}

Eigen::VectorXd BiharmonicStepper::rhs(const Field& c_prev, const Eigen::VectorXd& g,
                                       const std::vector<double>& alpha_bc,
                                       const std::vector<double>& beta_bc) const {
  const Grid& grid = *grid_;
  const Eigen::VectorXd& w = grid.quad_weights();
  Eigen::VectorXd b = w.cwiseProduct(c_prev.values()) / tau_;
  if (g.size()) b += w.cwiseProduct(g);
  if (!beta_bc.empty()) b -= boundary_source(grid, beta_bc);
  if (!alpha_bc.empty()) b += k_ * boundary_source(grid, alpha_bc).cwiseQuotient(w);
  return b;
}

Field BiharmonicStepper::step(const Field& c_prev, const Eigen::VectorXd& g,
                              const std::vector<double>& alpha_bc,
                              const std::vector<double>& beta_bc) const {
  c_prev.require_scalar();
  if (!(c_prev.grid() == *grid_)) throw InvalidArgument("biharmonic_step: grid mismatch");
  const Eigen::VectorXd b = rhs(c_prev, g, alpha_bc, beta_bc);
  Eigen::VectorXd c = ldlt_.solve(b);
  // one refinement sweep
  c += ldlt_.solve(b - m_ * c);
  const double res = inf_norm(m_ * c - b);
  if (!c.allFinite() || !(res <= 1e-9 * (inf_norm(b) + 1.0)))
    throw SolverError("biharmonic_step: linear solve residual too large", res);
  return Field(grid_, std::move(c));
}

Eigen::VectorXd BiharmonicStepper::residual(const Field& c, const Field& c_prev,
                                            const Eigen::VectorXd& g,
                                            const std::vector<double>& alpha_bc,
                                            const std::vector<double>& beta_bc) const {
  return m_ * c.values() - rhs(c_prev, g, alpha_bc, beta_bc);
}

Field biharmonic_step(const Field& c_prev, const BiharmonicData& data, double tau, double t_new) {
  const BiharmonicStepper st(c_prev.grid_ptr(), tau, data.lambda);
  Eigen::VectorXd g;
  if (data.g) g = data.g(t_new).values();
  const std::vector<double> a = data.alpha_bc ? data.alpha_bc(t_new) : std::vector<double>{};
  const std::vector<double> b = data.beta_bc ? data.beta_bc(t_new) : std::vector<double>{};
  return st.step(c_prev, g, a, b);
}

// ------------------------------------------------------------------ checks

CompatibilityReport compatibility_check(const Field& c0, const ModelParams& p, int level) {
  if (level != 0 && level != 1) throw InvalidArgument("compatibility level must be 0 or 1");
  c0.require_scalar();
  const Grid& g = c0.grid();
  double h = g.hx();
  if (g.dim() == 2) h = std::max(h, g.hy());
  CompatibilityReport rep;
  const Field lap = laplacian(c0);
  rep.tol0 = 1e-8 + h * h * inf_norm(lap.values());
  rep.residual0 = normal_derivative(c0);
  rep.level0_ok = true;
  for (double r : rep.residual0) rep.level0_ok = rep.level0_ok && std::abs(r) <= rep.tol0;
  if (level == 1) {
    // third differences of Lap_h c0 away from the boundary layer
    double m3 = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const int na = g.count(a), nb = a == 0 ? g.ny() : g.nx();
      const double ha = g.spacing(a);
      for (int j = 0; j < nb; ++j) {
        auto L = [&](int i) { return a == 0 ? lap[g.node(i, j)] : lap[g.node(j, i)]; };
        for (int i = 1; i + 3 <= na - 2; ++i) {
          const double d3 = (L(i + 3) - 3.0 * L(i + 2) + 3.0 * L(i + 1) - L(i)) / (ha * ha * ha);
          m3 = std::max(m3, std::abs(d3));
        }
      }
    }
    rep.tol1 = 1e-8 + 2.0 * h * h * m3;
    rep.level1_ok = true;
    for (const auto& e : g.boundary()) {
      const int i = g.ix(e.node), j = g.iy(e.node);
      const int dir = -e.side;
      auto at = [&](int off) {
        return e.axis == 0 ? lap[g.node(i + dir * off, j)] : lap[g.node(i, j + dir * off)];
      };
      // quadratic through the first three interior layers, differentiated at the face
      const double d_in = (-5.0 * at(1) + 8.0 * at(2) - 3.0 * at(3)) / (2.0 * g.spacing(e.axis));
      const double face_lap = 3.0 * at(1) - 3.0 * at(2) + at(3);
      double target;
      try {
        target = script_R(p.rate, p.free_energy, c0[e.node], face_lap);
      } catch (const std::exception&) {
        target = NAN;
      }
      const double r = -d_in - target;
      rep.residual1.push_back(r);
      rep.level1_ok = rep.level1_ok && std::abs(r) <= rep.tol1;
    }
  }
  rep.ok = rep.level0_ok && rep.level1_ok;
  return rep;
}

DetruncationResult detruncate_check(const Trajectory& traj, const Truncation& tr) {
  DetruncationResult out;
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const Field& c = traj.states[s].c;
    const Grid& g = c.grid();
    const Field lap = laplacian(c);
    std::vector<Field> grad;
    for (int a = 0; a < g.dim(); ++a) grad.push_back(gradient_component(c, a));
    for (std::size_t k = 0; k < g.size(); ++k) {
      double g2 = 0.0;
      for (const Field& d : grad) g2 += d[k] * d[k];
      const double gn = std::sqrt(g2);
      out.max_gradient = std::max(out.max_gradient, gn);
      out.max_laplacian = std::max(out.max_laplacian, std::abs(lap[k]));
      if (out.ok && !(gn < tr.alpha && std::abs(lap[k]) < tr.alpha)) {
        out.ok = false;
        out.first_violation = std::make_pair(static_cast<int>(s), k);
      }
    }
  }
  return out;
}

std::vector<double> strong_residuals(const Trajectory& traj, const ModelParams& p, bool truncated) {
  if (traj.states.size() < 2) return {};
  const Truncation tr{p.truncation.value_or(1.0)};
  const double tau = traj.tg.tau();
  const BiharmonicStepper st(traj.states[0].c.grid_ptr(), tau);
  std::vector<double> out;
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const Field& c = traj.states[i].c;
    const Field lap = laplacian(c);
    const Field gi = truncated ? truncated_laplacian_fprime(c, p.free_energy, tr)
                               : laplacian_fprime(c, p.free_energy);
    const Eigen::VectorXd r =
        st.residual(c, traj.states[i - 1].c, gi.values(), {}, reaction_datum(c, lap, p));
    out.push_back(inf_norm(r.cwiseQuotient(c.grid().quad_weights())));
  }
  return out;
}

// ------------------------------------------------------------------ Picard

Trajectory picard_solve(const Field& c0, const ModelParams& p, const TimeGrid& tg,
                        const PicardOptions& opt) {
  p.validate();
  tg.validate();
  c0.require_scalar();
  if (!p.truncation) throw InvalidArgument("picard_solve requires a truncation level");
  if (p.rho != 1.0) throw InvalidArgument("picard_solve requires rho = 1");
  if (p.elasticity) throw InvalidArgument("picard_solve does not support elasticity");
  if (!(opt.tol > 0.0) || opt.max_outer < 1) throw InvalidArgument("picard: bad tolerance");
  const Truncation tr{*p.truncation};
  tr.validate();

  const CompatibilityReport compat = compatibility_check(c0, p, opt.compat_level);
  if (!compat.ok) {
    std::ostringstream msg;
    msg << "picard_solve: initial data fails the level-" << opt.compat_level
        << " compatibility check";
    throw InvalidArgument(msg.str());
  }

  const GridPtr& gp = c0.grid_ptr();
  const double tau = tg.tau();
  const BiharmonicStepper st(gp, tau);
  const SparseMatrix& K = st.stiffness();

  std::vector<Field> v(static_cast<std::size_t>(tg.n) + 1, c0);
  StrongInfo info;
  if (opt.lagged_start) {
    // predictor: march with the data taken from the previous step
    try {
      for (int i = 1; i <= tg.n; ++i) {
        const Field& prev = v[static_cast<std::size_t>(i - 1)];
        const Field lap = laplacian(prev);
        const Field gi = truncated_laplacian_fprime(prev, p.free_energy, tr);
        v[static_cast<std::size_t>(i)] =
            st.step(prev, gi.values(), {}, reaction_datum(prev, lap, p));
      }
    } catch (const std::exception&) {
      std::fill(v.begin(), v.end(), c0);
    }
  }
  std::vector<double> res;
  double prev_inc = NAN;
  bool converged = false;
  for (int k = 1; k <= opt.max_outer; ++k) {
    std::vector<Field> next;
    next.reserve(v.size());
    next.push_back(c0);
    try {
      for (int i = 1; i <= tg.n; ++i) {
        const Field& vi = v[static_cast<std::size_t>(i)];
        const Field lap = laplacian(vi);
        const Field gi = truncated_laplacian_fprime(vi, p.free_energy, tr);
        next.push_back(st.step(next.back(), gi.values(), {}, reaction_datum(vi, lap, p)));
      }
    } catch (const DomainError& e) {
      std::ostringstream msg;
      msg << "picard_solve: iterate " << k << " left the free-energy domain (" << e.what() << ")";
      throw SolverError(msg.str(), INFINITY, info.contraction);
    } catch (const RangeError& e) {
      std::ostringstream msg;
      msg << "picard_solve: iterate " << k << " overflowed the rate (" << e.what() << ")";
      throw SolverError(msg.str(), INFINITY, info.contraction);
    }
    const double inc = trajectory_distance(next, v, tau, K);
    info.outer_iters = k;
    info.increments.push_back(inc);
    if (std::isfinite(prev_inc) && prev_inc > 0.0) info.contraction.push_back(inc / prev_inc);
    prev_inc = inc;
    v = std::move(next);
    if (opt.verbose)
      std::clog << "solver=picard iter=" << k << " residual=" << inc << '\n';
    if (!std::isfinite(inc)) break;
    if (inc < opt.tol) {
      Trajectory probe;
      probe.tg = tg;
      for (const Field& f : v) probe.states.push_back(State{f, f, std::nullopt, 0.0});
      res = strong_residuals(probe, p, true);
      double worst = 0.0;
      for (double r : res) worst = std::max(worst, r);
      if (worst <= 10.0 * opt.tol) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "picard_solve: no convergence in " << info.outer_iters << " outer iterations";
    throw SolverError(msg.str(), info.increments.empty() ? INFINITY : info.increments.back(),
                      info.contraction);
  }

  Trajectory traj;
  traj.tg = tg;
  traj.params_hash = params_hash(p);
  for (int i = 0; i <= tg.n; ++i) {
    State s;
    s.c = v[static_cast<std::size_t>(i)];
    s.mu = chemical_potential(s.c, nullptr, p);
    s.t = tg.time(i);
    traj.states.push_back(std::move(s));
  }
  traj.energy0 = total_energy(c0, nullptr, p);
  const DetruncationResult det = detruncate_check(traj, tr);
  info.detrunc_ok = det.ok;
  const auto& w = c0.grid().quad_weights();
  for (int i = 1; i <= tg.n; ++i) {
    const Field& c = traj.states[static_cast<std::size_t>(i)].c;
    StepReport r;
    r.i = i;
    r.t = tg.time(i);
    r.energy = total_energy(c, nullptr, p);
    r.mass = integrate(c);
    const Field lap = laplacian(c);
    const Field gi = truncated_laplacian_fprime(c, p.free_energy, tr);
    double fl = w.dot(gi.values());
    const auto beta = reaction_datum(c, lap, p);
    for (std::size_t e = 0; e < beta.size(); ++e) fl -= c.grid().boundary()[e].weight * beta[e];
    r.flux = fl;
    r.newton_iters = info.outer_iters;
    r.strong_residual = res[static_cast<std::size_t>(i - 1)];
    r.max_residual = r.strong_residual;
    Trajectory one;
    one.states.push_back(traj.states[static_cast<std::size_t>(i)]);
    r.detrunc_ok = detruncate_check(one, tr).ok;
    traj.reports.push_back(r);
  }
  traj.strong = std::move(info);
  return traj;
}

}  // namespace chr
