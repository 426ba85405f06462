#include "chrflow/gradientflow.hpp"

#include "chrflow/errors.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace chr {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void append(Triplets& t, const SparseMatrix& m, Eigen::Index r0, Eigen::Index c0, double s = 1.0) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      t.emplace_back(static_cast<int>(r0 + it.row()), static_cast<int>(c0 + it.col()),
                     s * it.value());
}

void append_diag(Triplets& t, const Eigen::VectorXd& d, Eigen::Index r0, Eigen::Index c0) {
  for (Eigen::Index k = 0; k < d.size(); ++k)
    if (d[k] != 0.0) t.emplace_back(static_cast<int>(r0 + k), static_cast<int>(c0 + k), d[k]);
}

Eigen::VectorXd nodal_f(const FreeEnergy& fe, const Eigen::VectorXd& c, int order) {
  Eigen::VectorXd out(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    try {
      out[k] = fe.eval(c[k], order);
    } catch (const DomainError& e) {
      throw DomainError(e.what(), static_cast<long>(k));
    }
  }
  return out;
}

// The stacked Euler-Lagrange system of one step.
class StepSystem {
 public:
  StepSystem(const State& prev, double tau, const ModelParams& p)
      : prev_(prev), tau_(tau), p_(p), grid_(prev.c.grid()) {
    n_ = static_cast<Eigen::Index>(grid_.size());
    K_ = stiffness_matrix(grid_);
    if (p.elasticity) el_.emplace(prev.c.grid_ptr(), *p.elasticity);
    size_ = el_ ? 4 * n_ + 3 : 2 * n_;
  }

  Eigen::Index size() const { return size_; }
  Eigen::Index nodes() const { return n_; }
  bool elastic() const { return el_.has_value(); }
  const ElasticOperator& el() const { return *el_; }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const {
    const auto& w = grid_.quad_weights();
    const auto& wb = grid_.bquad_weights();
    const auto c = x.segment(0, n_);
    const auto mu = x.segment(n_, n_);
    Eigen::VectorXd F(size_);
    F.segment(0, n_) = w.cwiseProduct(c - prev_.c.values()) / tau_ + K_ * mu;
    for (std::size_t k : grid_.boundary_nodes()) {
      const auto i = static_cast<Eigen::Index>(k);
      F[i] -= wb[i] * p_.rate.rate(prev_.c[k], mu[i]);
    }
    F.segment(n_, n_) = w.cwiseProduct(mu) - p_.rho * (K_ * c) -
                        w.cwiseProduct(nodal_f(p_.free_energy, c, 1));
    if (el_) {
      const Eigen::VectorXd u = x.segment(2 * n_, 2 * n_);
      const auto lam = x.segment(4 * n_, 3);
      F.segment(n_, n_) -= el_->grad_c(c, u);
      F.segment(2 * n_, 2 * n_) = el_->grad_u(c, u) + el_->constraints().transpose() * lam;
      F.segment(4 * n_, 3) = el_->constraints() * u;
    }
    return F;
  }

  SparseMatrix jacobian(const Eigen::VectorXd& x) const {
    const auto& w = grid_.quad_weights();
    const auto& wb = grid_.bquad_weights();
    const Eigen::VectorXd c = x.segment(0, n_);
    const auto mu = x.segment(n_, n_);
    Triplets t;
    append_diag(t, w / tau_, 0, 0);
    append(t, K_, 0, n_);
    Eigen::VectorXd rd = Eigen::VectorXd::Zero(n_);
    for (std::size_t k : grid_.boundary_nodes()) {
      const auto i = static_cast<Eigen::Index>(k);
      rd[i] = -wb[i] * p_.rate.rate_dw(prev_.c[k], mu[i]);
    }
    append_diag(t, rd, 0, n_);
    append(t, K_, n_, 0, -p_.rho);
    Eigen::VectorXd fd = -w.cwiseProduct(nodal_f(p_.free_energy, c, 2));
    if (el_) fd -= el_->diag();
    append_diag(t, fd, n_, 0);
    append_diag(t, w, n_, n_);
    if (el_) {
      append(t, el_->coupling(), n_, 2 * n_);
      const SparseMatrix bt = el_->coupling().transpose();
      append(t, bt, 2 * n_, 0, -1.0);
      append(t, el_->stiffness(), 2 * n_, 2 * n_);
      const SparseMatrix ct = el_->constraints().transpose();
      append(t, ct, 2 * n_, 4 * n_);
      append(t, el_->constraints(), 4 * n_, 2 * n_);
    }
    SparseMatrix J(size_, size_);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }

 private:
  const State& prev_;
  double tau_;
  const ModelParams& p_;
  const Grid& grid_;
  Eigen::Index n_ = 0;
  Eigen::Index size_ = 0;
  SparseMatrix K_;
  std::optional<ElasticOperator> el_;
};

struct NewtonOutcome {
  bool converged = false;
  int iters = 0;
  double residual = INFINITY;
};

NewtonOutcome newton_solve(const StepSystem& sys, Eigen::VectorXd& x, const NewtonConfig& cfg,
                           double scale) {
  NewtonOutcome out;
  Eigen::VectorXd F;
  try {
    F = sys.residual(x);
  } catch (const std::exception&) {
    return out;
  }
  const double tol = cfg.abs_tol;
  const double floor_tol = std::max(cfg.abs_tol, cfg.rel_tol * scale);
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  out.residual = inf_norm(F);
  if (cfg.verbose) std::clog << "solver=mm_newton iter=0 residual=" << out.residual << '\n';
  auto stalled = [&]() {
    out.converged = out.residual <= floor_tol;
    return out;
  };
  while (out.residual > tol) {
    if (out.iters >= cfg.max_iter) return stalled();
    ++out.iters;
    SparseMatrix J;
    try {
      J = sys.jacobian(x);
    } catch (const std::exception&) {
      return out;
    }
    lu.compute(J);
    if (lu.info() != Eigen::Success) return stalled();
    const Eigen::VectorXd dx = lu.solve(-F);
    if (!dx.allFinite()) return stalled();
    const double phi0 = 0.5 * F.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40 && !accepted; ++ls, t *= cfg.backtrack) {
      const Eigen::VectorXd trial = x + t * dx;
      Eigen::VectorXd Ft;
      try {
        Ft = sys.residual(trial);
      } catch (const DomainError&) {
        continue;
      } catch (const RangeError&) {
        continue;
      }
      if (Ft.allFinite() && 0.5 * Ft.squaredNorm() <= (1.0 - 2.0 * cfg.armijo * t) * phi0) {
        x = trial;
        F = Ft;
        accepted = true;
      }
    }
    if (!accepted) return stalled();
    out.residual = inf_norm(F);
    if (cfg.verbose)
      std::clog << "solver=mm_newton iter=" << out.iters << " residual=" << out.residual << '\n';
  }
  out.converged = true;
  return out;
}

Field relaxed_displacement(const Field& c, const ModelParams& p) {
  return solve_elasticity(c, *p.elasticity);
}

double energy_of(const Field& c, const std::optional<Field>& u, const ModelParams& p) {
  return total_energy(c, u ? &*u : nullptr, p);
}

}  // namespace

void TimeGrid::validate(bool allow_empty) const {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time.T must be positive");
  if (n < (allow_empty ? 0 : 1)) throw InvalidArgument("time.steps must be at least 1");
}

std::string params_hash(const ModelParams& p) {
  std::ostringstream s;
  s << std::setprecision(17) << to_string(p.free_energy.kind) << ' ' << p.free_energy.omega << ' '
    << p.free_energy.kt << ' ' << p.free_energy.eps_dom << ' ';
  if (p.free_energy.clamp) s << (*p.free_energy.clamp)[0] << ' ' << (*p.free_energy.clamp)[1];
  s << '|' << to_string(p.rate.kind) << ' ' << p.rate.k_ins << ' ' << p.rate.k_ext << ' '
    << p.rate.beta << ' ' << p.rate.mu_e << ' ' << p.rate.kappa << ' ' << p.rate.w_max << '|'
    << p.rho << '|';
  if (p.elasticity) {
    s << p.elasticity->lambda << ' ' << p.elasticity->shear;
    for (double v : p.elasticity->e0) s << ' ' << v;
  }
  s << '|';
  if (p.truncation) s << *p.truncation;
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

double functional_A(const Field& c, const Field& v, const ReactionRate& r) {
  v.require_scalar();
  const Grid& g = v.grid();
  const SparseMatrix K = stiffness_matrix(g);
  double a = 0.5 * v.values().dot(K * v.values());
  const auto& wb = g.bquad_weights();
  for (std::size_t k : g.boundary_nodes())
    a -= wb[static_cast<Eigen::Index>(k)] * r.antiderivative(c[k], v[k]);
  return a;
}

AstarResult conjugate_Astar(const Field& c, const Field& vstar, const ReactionRate& r,
                            const NewtonConfig& newton) {
  BbarResult b = bbar(c, vstar, r, newton);
  AstarResult out;
  out.value = vstar.grid().quad_weights().dot(vstar.values().cwiseProduct(b.mu.values())) -
              functional_A(c, b.mu, r);
  out.mu = std::move(b.mu);
  out.iterations = b.iterations;
  out.residual = b.residual;
  return out;
}

double mm_objective(const Field& c, const Field& c_prev, double tau, const ModelParams& p,
                    const NewtonConfig& newton) {
  std::optional<Field> u;
  if (p.elasticity) u = relaxed_displacement(c, p);
  const Field vstar(c.grid_ptr(), -(c.values() - c_prev.values()) / tau);
  return energy_of(c, u, p) + tau * conjugate_Astar(c_prev, vstar, p.rate, newton).value;
}

State initial_state(const Field& c0, const ModelParams& p) {
  c0.require_scalar();
  State s;
  s.c = c0;
  if (p.elasticity) s.u = relaxed_displacement(c0, p);
  s.mu = chemical_potential(c0, s.u ? &*s.u : nullptr, p);
  s.t = 0.0;
  return s;
}

std::pair<State, StepReport> mm_step(const State& prev, const TimeGrid& tg, const ModelParams& p,
                                     const WeakOptions& opt, double energy0, double dissipated) {
  tg.validate();
  p.validate();
  opt.newton.validate();
  prev.c.require_scalar();
  if (p.elasticity && prev.c.grid().dim() != 2)
    throw InvalidArgument("elasticity requires a 2D grid");
  const double tau = tg.tau();
  const Grid& g = prev.c.grid();
  const GridPtr& gp = prev.c.grid_ptr();
  StepSystem sys(prev, tau, p);
  const Eigen::Index n = sys.nodes();

  const double energy_prev = energy_of(prev.c, prev.u, p);
  if (std::isnan(energy0)) energy0 = energy_prev;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.size());
  x.segment(0, n) = prev.c.values();
  std::optional<Field> u_prev = prev.u;
  if (p.elasticity && !u_prev) u_prev = relaxed_displacement(prev.c, p);
  x.segment(n, n) = chemical_potential(prev.c, u_prev ? &*u_prev : nullptr, p).values();
  if (p.elasticity) x.segment(2 * n, 2 * n) = u_prev->values();

  const double scale = inf_norm(sys.residual(x)) + 1.0;
  NewtonOutcome res = newton_solve(sys, x, opt.newton, scale);
  bool fallback = false;
  int iters = res.iters;

  if (!res.converged) {
    // gradient descent on the variational objective in the lumped-mass metric
    fallback = true;
    NewtonConfig inner = opt.newton;
    inner.max_iter = std::max(inner.max_iter, 50);
    const auto& w = g.quad_weights();
    const auto& wb = g.bquad_weights();
    const SparseMatrix K = stiffness_matrix(g);
    struct Eval {
      double J = 0.0;
      Eigen::VectorXd grad;  // weak gradient W (mu(c) - bbar)
      Field mu_b;
      std::optional<Field> u;
    };
    auto eval = [&](const Field& cc, bool want_grad) {
      Eval e;
      if (p.elasticity) e.u = relaxed_displacement(cc, p);
      const Field vstar(gp, -(cc.values() - prev.c.values()) / tau);
      BbarResult b = bbar(prev.c, vstar, p.rate, inner);
      const double a = w.dot(vstar.values().cwiseProduct(b.mu.values())) -
                       functional_A(prev.c, b.mu, p.rate);
      e.J = energy_of(cc, e.u, p) + tau * a;
      if (want_grad)
        e.grad = w.cwiseProduct(chemical_potential(cc, e.u ? &*e.u : nullptr, p).values() -
                                b.mu.values());
      e.mu_b = std::move(b.mu);
      return e;
    };
    // descent direction in the metric of the convexified step Hessian
    //   rho K + W max(f'', 0) + W S^{-1} W / tau,  S = K + W_b |R_w|
    auto direction = [&](const Field& cc, const Eval& e) {
      Eigen::VectorXd sd = Eigen::VectorXd::Zero(n);
      for (std::size_t k : g.boundary_nodes()) {
        const auto i = static_cast<Eigen::Index>(k);
        sd[i] = -wb[i] * p.rate.rate_dw(prev.c[k], e.mu_b[k]);
      }
      Eigen::VectorXd ad = w.cwiseProduct(nodal_f(p.free_energy, cc.values(), 2).cwiseMax(0.0));
      Triplets t;
      append(t, K, 0, 0, p.rho);
      append_diag(t, ad, 0, 0);
      append_diag(t, w, 0, n);
      append_diag(t, w / tau, n, 0);
      append(t, K, n, n, -1.0);
      append_diag(t, -sd, n, n);
      SparseMatrix M(2 * n, 2 * n);
      M.setFromTriplets(t.begin(), t.end());
      Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu(M);
      if (lu.info() != Eigen::Success)
        throw SolverError("mm_step: descent metric is singular", inf_norm(e.grad));
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
      rhs.head(n) = -e.grad;
      return Eigen::VectorXd(lu.solve(rhs).head(n));
    };

    Field c = prev.c;
    Eval cur = eval(c, true);
    for (int it = 0; it < opt.fallback_iters; ++it) {
      if (inf_norm(cur.grad) <= opt.newton.abs_tol) break;
      const Eigen::VectorXd d = direction(c, cur);
      const double slope = -cur.grad.dot(d);
      if (!(slope > 1e-15 * (1.0 + std::abs(cur.J)))) break;
      bool accepted = false;
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= opt.newton.backtrack) {
        try {
          Field trial(gp, c.values() + t * d);
          Eval e = eval(trial, false);
          if (e.J <= cur.J - opt.newton.armijo * t * slope) {
            c = std::move(trial);
            accepted = true;
            break;
          }
        } catch (const DomainError&) {
        } catch (const RangeError&) {
        } catch (const SolverError&) {
        }
      }
      if (!accepted) break;
      cur = eval(c, true);
      ++iters;
    }
    x.segment(0, n) = c.values();
    x.segment(n, n) = cur.mu_b.values();
    if (p.elasticity) x.segment(2 * n, 2 * n) = cur.u->values();
    if (p.elasticity) x.segment(4 * n, 3).setZero();
    res = newton_solve(sys, x, opt.newton, scale);
    iters += res.iters;
    if (!res.converged) {
      std::ostringstream msg;
      msg << "mm_step: Newton failed after the descent fallback (residual " << res.residual << ")";
      throw SolverError(msg.str(), res.residual);
    }
  }

  State next;
  next.c = Field(gp, x.segment(0, n));
  next.mu = Field(gp, x.segment(n, n));
  if (p.elasticity) next.u = Field(gp, x.segment(2 * n, 2 * n), 2);
  next.t = prev.t + tau;

  StepReport rep;
  rep.i = static_cast<int>(std::lround(prev.t / tau)) + 1;
  rep.t = next.t;
  rep.energy = energy_of(next.c, next.u, p);
  const Field vstar(gp, -(next.c.values() - prev.c.values()) / tau);
  NewtonConfig report_cfg = opt.newton;
  report_cfg.max_iter = std::max(report_cfg.max_iter, 50);
  const BbarResult b = bbar(prev.c, vstar, p.rate, report_cfg, &next.mu);
  rep.astar = g.quad_weights().dot(vstar.values().cwiseProduct(b.mu.values())) -
              functional_A(prev.c, b.mu, p.rate);
  const Field zero(gp);
  const BbarResult anchor = bbar(prev.c, zero, p.rate, report_cfg);
  rep.aanchor = functional_A(prev.c, anchor.mu, p.rate);
  rep.mass = integrate(next.c);
  const auto& wb = g.bquad_weights();
  for (std::size_t k : g.boundary_nodes())
    rep.flux += wb[static_cast<Eigen::Index>(k)] * p.rate.rate(prev.c[k], next.mu[k]);
  rep.newton_iters = iters;
  rep.max_residual = res.residual;
  rep.fallback = fallback;
  const double dis = tau * (rep.astar + rep.aanchor);
  rep.step_slack = energy_prev - (rep.energy + dis);
  rep.telescoped_slack = energy0 - (rep.energy + dissipated + dis);
  const double escale = std::abs(energy0) > 0.0 ? std::abs(energy0) : 1.0;
  rep.energy_ok = rep.step_slack >= -opt.energy_tol * escale &&
                  rep.telescoped_slack >= -opt.telescoped_tol * rep.i * escale;
  return {std::move(next), rep};
}

Trajectory run_weak(const Field& c0, const TimeGrid& tg, const ModelParams& p,
                    const WeakOptions& opt) {
  tg.validate(true);
  p.validate();
  if (p.elasticity && c0.grid().dim() != 2) throw InvalidArgument("elasticity requires a 2D grid");
  Trajectory traj;
  traj.tg = tg;
  traj.params_hash = params_hash(p);
  traj.states.push_back(initial_state(c0, p));
  const double energy0 = energy_of(c0, traj.states[0].u, p);
  traj.energy0 = energy0;
  double dissipated = 0.0;
  for (int i = 1; i <= tg.n; ++i) {
    try {
      auto [next, rep] = mm_step(traj.states.back(), tg, p, opt, energy0, dissipated);
      next.t = tg.time(i);
      rep.t = next.t;
      rep.i = i;
      dissipated += tg.tau() * (rep.astar + rep.aanchor);
      traj.states.push_back(std::move(next));
      traj.reports.push_back(rep);
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "step " << i << ": " << e.what();
      traj.error = msg.str();
      break;
    }
  }
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << std::setprecision(17);
  os << "i,t,energy,Astar,Aanchor,mass,flux,newton_iters,max_residual";
  if (traj.strong) os << ",outer_iter,contraction_ratio,detrunc_ok";
  os << '\n';
  auto strong_cols = [&](bool ok) {
    if (!traj.strong) return;
    const auto& s = *traj.strong;
    os << ',' << s.outer_iters << ',';
    if (!s.contraction.empty()) os << s.contraction.back();
    os << ',' << (ok ? "true" : "false");
  };
  if (!traj.states.empty()) {
    const State& s0 = traj.states.front();
    os << 0 << ',' << s0.t << ',' << traj.energy0;
    os << ",0,0," << integrate(s0.c) << ",0,0,0";
    strong_cols(true);
    os << '\n';
  }
  for (const auto& r : traj.reports) {
    os << r.i << ',' << r.t << ',' << r.energy << ',' << r.astar << ',' << r.aanchor << ','
       << r.mass << ',' << r.flux << ',' << r.newton_iters << ',' << r.max_residual;
    strong_cols(r.detrunc_ok);
    os << '\n';
  }
}

}  // namespace chr
