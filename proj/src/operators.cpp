#include "chrflow/operators.hpp"

#include "chrflow/errors.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <iostream>
#include <sstream>

namespace chr {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_edge(Triplets& t, std::size_t a, std::size_t b, double coef) {
  const auto i = static_cast<int>(a);
  const auto j = static_cast<int>(b);
  t.emplace_back(i, i, coef);
  t.emplace_back(j, j, coef);
  t.emplace_back(i, j, -coef);
  t.emplace_back(j, i, -coef);
}

void log_iter(bool verbose, const char* name, int k, double r) {
  if (verbose) std::clog << "solver=" << name << " iter=" << k << " residual=" << r << '\n';
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

SparseMatrix diag_matrix(const Eigen::VectorXd& d) {
  SparseMatrix m(d.size(), d.size());
  Triplets t;
  for (Eigen::Index k = 0; k < d.size(); ++k) t.emplace_back(k, k, d[k]);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

void Conductivity::validate(int dim) const {
  const bool ok = dim == 1 ? xx > 0.0 : (xx > 0.0 && xx * yy - xy * xy > 0.0);
  if (!ok || !std::isfinite(xx) || !std::isfinite(xy) || !std::isfinite(yy))
    throw InvalidArgument("diffusion tensor must be symmetric positive definite");
}

SparseMatrix stiffness_matrix(const Grid& g, const Conductivity& lambda) {
  lambda.validate(g.dim());
  const auto n = static_cast<Eigen::Index>(g.size());
  Triplets t;
  if (g.dim() == 1) {
    const double c = lambda.xx / g.hx();
    for (int i = 0; i + 1 < g.nx(); ++i) add_edge(t, g.node(i), g.node(i + 1), c);
  } else {
    const double hx = g.hx(), hy = g.hy();
    auto wy = [&](int j) { return (j == 0 || j == g.ny() - 1) ? 0.5 * hy : hy; };
    auto wx = [&](int i) { return (i == 0 || i == g.nx() - 1) ? 0.5 * hx : hx; };
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i + 1 < g.nx(); ++i)
        add_edge(t, g.node(i, j), g.node(i + 1, j), lambda.xx * wy(j) / hx);
    for (int j = 0; j + 1 < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i)
        add_edge(t, g.node(i, j), g.node(i, j + 1), lambda.yy * wx(i) / hy);
    if (lambda.xy != 0.0) {
      // 2 xy gx gy hx hy per cell with cell-averaged gradients
      for (int j = 0; j + 1 < g.ny(); ++j) {
        for (int i = 0; i + 1 < g.nx(); ++i) {
          const std::size_t nodes[4] = {g.node(i, j), g.node(i + 1, j), g.node(i, j + 1),
                                        g.node(i + 1, j + 1)};
          const double a[4] = {-0.5 / hx, 0.5 / hx, -0.5 / hx, 0.5 / hx};
          const double b[4] = {-0.5 / hy, -0.5 / hy, 0.5 / hy, 0.5 / hy};
          const double s = lambda.xy * hx * hy;
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q)
              t.emplace_back(static_cast<int>(nodes[p]), static_cast<int>(nodes[q]),
                             s * (a[p] * b[q] + b[p] * a[q]));
        }
      }
    }
  }
  SparseMatrix K(n, n);
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

Eigen::VectorXd boundary_source(const Grid& g, const std::vector<double>& face_data) {
  if (face_data.size() != g.boundary().size())
    throw InvalidArgument("boundary data size does not match the boundary entries");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t e = 0; e < face_data.size(); ++e) {
    const auto& be = g.boundary()[e];
    s[static_cast<Eigen::Index>(be.node)] += be.weight * face_data[e];
  }
  return s;
}

std::vector<double> boundary_values(const Field& f) {
  std::vector<double> out;
  out.reserve(f.grid().boundary().size());
  for (const auto& e : f.grid().boundary()) out.push_back(f[e.node]);
  return out;
}

Field laplacian(const Field& f, const Conductivity& lambda) {
  f.require_scalar();
  const Grid& g = f.grid();
  const SparseMatrix K = stiffness_matrix(g, lambda);
  Eigen::VectorXd v = -(K * f.values());
  return Field(f.grid_ptr(), v.cwiseQuotient(g.quad_weights()));
}

Field laplacian_with_flux(const Field& f, const Conductivity& lambda,
                          const std::vector<double>& flux) {
  f.require_scalar();
  const Grid& g = f.grid();
  const SparseMatrix K = stiffness_matrix(g, lambda);
  Eigen::VectorXd v = boundary_source(g, flux) - K * f.values();
  return Field(f.grid_ptr(), v.cwiseQuotient(g.quad_weights()));
}

std::vector<double> normal_derivative(const Field& f) {
  f.require_scalar();
  const Grid& g = f.grid();
  std::vector<double> out;
  out.reserve(g.boundary().size());
  for (const auto& e : g.boundary()) {
    const int i = g.ix(e.node), j = g.iy(e.node);
    auto at = [&](int off) {
      return e.axis == 0 ? f[g.node(i + off, j)] : f[g.node(i, j + off)];
    };
    const double h = g.spacing(e.axis);
    const int dir = -e.side;  // step into the domain
    const double d_in = (-3.0 * at(0) + 4.0 * at(dir) - at(2 * dir)) / (2.0 * h);
    out.push_back(-d_in);
  }
  return out;
}

Field gradient_component(const Field& f, int axis) {
  f.require_scalar();
  const Grid& g = f.grid();
  if (axis < 0 || axis >= g.dim()) throw InvalidArgument("gradient: bad axis");
  const int n = g.count(axis);
  const double h = g.spacing(axis);
  Eigen::VectorXd d(f.values().size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int i = g.ix(k), j = g.iy(k);
    const int p = axis == 0 ? i : j;
    auto at = [&](int q) { return axis == 0 ? f[g.node(q, j)] : f[g.node(i, q)]; };
    double v;
    if (p == 0)
      v = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    else if (p == n - 1)
      v = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    else
      v = (at(p + 1) - at(p - 1)) / (2.0 * h);
    d[static_cast<Eigen::Index>(k)] = v;
  }
  return Field(f.grid_ptr(), std::move(d));
}

Field solve_neumann_poisson(const Field& g, const Conductivity& lambda) {
  g.require_scalar();
  const Grid& grid = g.grid();
  const Eigen::VectorXd& w = grid.quad_weights();
  const double scale = w.dot(g.values().cwiseAbs());
  const double mean = w.dot(g.values());
  if (std::abs(mean) > 1e-10 * std::max(scale, 1e-300) && std::abs(mean) > 1e-300) {
    std::ostringstream msg;
    msg << "solve_neumann_poisson: right-hand side integral " << mean << " is not zero";
    throw InvalidArgument(msg.str());
  }
  const auto n = static_cast<Eigen::Index>(grid.size());
  const SparseMatrix K = stiffness_matrix(grid, lambda);
  SparseMatrix M(n + 1, n + 1);
  Triplets t;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(K, k); it; ++it)
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index k = 0; k < n; ++k) {
    t.emplace_back(static_cast<int>(k), static_cast<int>(n), w[k]);
    t.emplace_back(static_cast<int>(n), static_cast<int>(k), w[k]);
  }
  M.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = w.cwiseProduct(g.values());
  // drop the rounding-level mean so the bordered system stays consistent
  rhs.head(n) -= w * (mean / grid.volume());
  rhs[n] = 0.0;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve_neumann_poisson: factorization failed", INFINITY);
  Eigen::VectorXd sol = lu.solve(rhs);
  Eigen::VectorXd v = sol.head(n);
  const double res = inf_norm((K * v - rhs.head(n)).cwiseQuotient(w));
  if (!(res <= 1e-8 * std::max(inf_norm(g.values()), 1e-300)) && inf_norm(g.values()) > 0.0)
    throw SolverError("solve_neumann_poisson: residual too large", res);
  return Field(g.grid_ptr(), std::move(v));
}

double h1_norm(const Field& f) {
  f.require_scalar();
  const SparseMatrix K = stiffness_matrix(f.grid());
  const auto& v = f.values();
  return std::sqrt(v.dot(K * v) + f.grid().quad_weights().dot(v.cwiseAbs2()));
}

Field dual_h1_representer(const Field& g) {
  g.require_scalar();
  const Grid& grid = g.grid();
  SparseMatrix A = stiffness_matrix(grid) + diag_matrix(grid.quad_weights());
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("dual_h1_norm: factorization failed", INFINITY);
  Eigen::VectorXd rhs = grid.quad_weights().cwiseProduct(g.values());
  Eigen::VectorXd z = ldlt.solve(rhs);
  const double res = inf_norm(A * z - rhs);
  if (!(res <= 1e-9 * std::max(inf_norm(rhs), 1e-300)) && inf_norm(rhs) > 0.0)
    throw SolverError("dual_h1_norm: residual too large", res);
  return Field(g.grid_ptr(), std::move(z));
}

double dual_h1_norm(const Field& g) {
  const Field z = dual_h1_representer(g);
  const double s = g.grid().quad_weights().dot(g.values().cwiseProduct(z.values()));
  return std::sqrt(std::max(s, 0.0));
}

void NewtonConfig::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw InvalidArgument("newton tolerances must be positive");
  if (max_iter < 1) throw InvalidArgument("newton.max_iter must be at least 1");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("newton.backtrack must lie in (0,1)");
  if (!(armijo > 0.0 && armijo < 0.5)) throw InvalidArgument("newton.armijo must lie in (0,1/2)");
}

// ------------------------------------------------------------------ B and B-bar

Eigen::VectorXd apply_b(const Field& c, const Field& v, const ReactionRate& r) {
  const Grid& g = v.grid();
  Eigen::VectorXd out = stiffness_matrix(g) * v.values();
  const auto& wb = g.bquad_weights();
  for (std::size_t k : g.boundary_nodes()) {
    const auto i = static_cast<Eigen::Index>(k);
    out[i] -= wb[i] * r.rate(c[k], v[k]);
  }
  return out;
}

BbarResult bbar(const Field& c, const Field& vstar, const ReactionRate& r,
                const NewtonConfig& cfg, const Field* guess) {
  c.require_scalar();
  vstar.require_scalar();
  cfg.validate();
  if (!(c.grid() == vstar.grid())) throw InvalidArgument("bbar: grid mismatch");
  const Grid& g = vstar.grid();
  const auto n = static_cast<Eigen::Index>(g.size());
  const auto& w = g.quad_weights();
  const auto& wb = g.bquad_weights();
  const auto& bn = g.boundary_nodes();

  if (r.kind == RateKind::linear && r.kappa == 0.0) {
    BbarResult out{solve_neumann_poisson(vstar), 1, 0.0};
    const SparseMatrix K = stiffness_matrix(g);
    out.residual = inf_norm(K * out.mu.values() - w.cwiseProduct(vstar.values()));
    return out;
  }

  const SparseMatrix K = stiffness_matrix(g);
  const Eigen::VectorXd rhs = w.cwiseProduct(vstar.values());
  Eigen::VectorXd mu = guess ? guess->values() : Eigen::VectorXd::Zero(n);

  auto residual = [&](const Eigen::VectorXd& m) {
    Eigen::VectorXd res = K * m - rhs;
    for (std::size_t k : bn) {
      const auto i = static_cast<Eigen::Index>(k);
      res[i] -= wb[i] * r.rate(c[k], m[i]);
    }
    return res;
  };
  auto try_residual = [&](const Eigen::VectorXd& m, Eigen::VectorXd& out) {
    try {
      out = residual(m);
      return out.allFinite();
    } catch (const RangeError&) {
      return false;
    }
  };

  Eigen::VectorXd F = residual(mu);
  const double scale = inf_norm(rhs) + 1.0;
  auto converged = [&](const Eigen::VectorXd& res) {
    return inf_norm(res) <= std::max(cfg.abs_tol, cfg.rel_tol * scale);
  };

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  int it = 0;
  int picard_sweeps = 0;
  log_iter(cfg.verbose, "bbar", 0, inf_norm(F));
  while (!converged(F)) {
    if (it >= cfg.max_iter) {
      throw SolverError("bbar: Newton did not converge", inf_norm(F));
    }
    ++it;
    // J = K - diag(wb R_w); boundary entries must be positive for a monotone rate
    Eigen::VectorXd jd = Eigen::VectorXd::Zero(n);
    for (std::size_t k : bn) {
      const auto i = static_cast<Eigen::Index>(k);
      const double d = r.rate_dw(c[k], mu[i]);
      if (!(d < 0.0)) {
        std::ostringstream msg;
        msg << "bbar: rate is not strictly decreasing at boundary node " << k
            << " (dR/dw = " << d << ")";
        throw SolverError(msg.str(), inf_norm(F));
      }
      jd[i] = -wb[i] * d;
    }
    SparseMatrix J = K + diag_matrix(jd);
    ldlt.compute(J);
    if (ldlt.info() != Eigen::Success) throw SolverError("bbar: singular Jacobian", inf_norm(F));
    const Eigen::VectorXd step = ldlt.solve(-F);

    const double phi0 = 0.5 * F.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial, Ft;
    for (int ls = 0; ls < 40; ++ls) {
      trial = mu + t * step;
      if (try_residual(trial, Ft) && 0.5 * Ft.squaredNorm() <= (1.0 - 2.0 * cfg.armijo * t) * phi0) {
        accepted = true;
        break;
      }
      t *= cfg.backtrack;
    }
    if (!accepted) {
      // Picard on the Robin term: (K + L Wb) mu' = rhs + Wb (R(c, mu) + L mu)
      double L = jd.maxCoeff() / wb.maxCoeff();
      Eigen::VectorXd shift = Eigen::VectorXd::Zero(n);
      for (std::size_t k : bn) shift[static_cast<Eigen::Index>(k)] = L * wb[static_cast<Eigen::Index>(k)];
      ldlt.compute(K + diag_matrix(shift));
      Eigen::VectorXd src(n);
      for (int sweep = 0; sweep < 20; ++sweep) {
        src = rhs;
        for (std::size_t k : bn) {
          const auto i = static_cast<Eigen::Index>(k);
          src[i] += wb[i] * (r.rate(c[k], mu[i]) + L * mu[i]);
        }
        mu = ldlt.solve(src);
        ++picard_sweeps;
      }
      F = residual(mu);
      log_iter(cfg.verbose, "bbar-picard", it, inf_norm(F));
      if (picard_sweeps > 20 * cfg.max_iter)
        throw SolverError("bbar: fallback iteration stalled", inf_norm(F));
      continue;
    }
    mu = trial;
    F = Ft;
    log_iter(cfg.verbose, "bbar", it, inf_norm(F));
  }
  // one polishing Newton step, kept only if it lowers the residual
  if (it > 0 || inf_norm(F) > 0.0) {
    Eigen::VectorXd jd = Eigen::VectorXd::Zero(n);
    bool ok = true;
    for (std::size_t k : bn) {
      const auto i = static_cast<Eigen::Index>(k);
      const double d = r.rate_dw(c[k], mu[i]);
      if (!(d < 0.0)) ok = false;
      jd[i] = -wb[i] * d;
    }
    if (ok) {
      ldlt.compute(K + diag_matrix(jd));
      if (ldlt.info() == Eigen::Success) {
        Eigen::VectorXd trial = mu + ldlt.solve(-F);
        Eigen::VectorXd Ft;
        if (try_residual(trial, Ft) && inf_norm(Ft) < inf_norm(F)) {
          mu = trial;
          F = Ft;
        }
      }
    }
  }
  return BbarResult{Field(vstar.grid_ptr(), mu), it, inf_norm(F)};
}

// ------------------------------------------------------------------ elasticity

ElasticOperator::ElasticOperator(GridPtr grid, const ElasticParams& ep)
    : grid_(std::move(grid)), ep_(ep) {
  ep_.validate();
  const Grid& g = *grid_;
  if (g.dim() != 2) throw InvalidArgument("elasticity requires a 2D grid");
  const auto N = static_cast<int>(g.size());
  const double hx = g.hx(), hy = g.hy();
  const int cells = (g.nx() - 1) * (g.ny() - 1);
  const int nq = 4 * cells;

  Triplets st;
  corner_w_.resize(nq);
  corner_node_.resize(static_cast<std::size_t>(nq));
  int q = 0;
  for (int j = 0; j + 1 < g.ny(); ++j) {
    for (int i = 0; i + 1 < g.nx(); ++i) {
      for (int b = 0; b < 2; ++b) {
        for (int a = 0; a < 2; ++a, ++q) {
          corner_w_[q] = 0.25 * hx * hy;
          corner_node_[static_cast<std::size_t>(q)] = g.node(i + a, j + b);
          const int ux_l = static_cast<int>(g.node(i, j + b));
          const int ux_r = static_cast<int>(g.node(i + 1, j + b));
          const int v_lo = static_cast<int>(g.node(i + a, j));
          const int v_hi = static_cast<int>(g.node(i + a, j + 1));
          // exx
          st.emplace_back(3 * q, ux_r, 1.0 / hx);
          st.emplace_back(3 * q, ux_l, -1.0 / hx);
          // eyy
          st.emplace_back(3 * q + 1, N + v_hi, 1.0 / hy);
          st.emplace_back(3 * q + 1, N + v_lo, -1.0 / hy);
          // gamma = d_y ux + d_x uy
          st.emplace_back(3 * q + 2, v_hi, 1.0 / hy);
          st.emplace_back(3 * q + 2, v_lo, -1.0 / hy);
          st.emplace_back(3 * q + 2, N + ux_r, 1.0 / hx);
          st.emplace_back(3 * q + 2, N + ux_l, -1.0 / hx);
        }
      }
    }
  }
  strain_.resize(3 * nq, 2 * N);
  strain_.setFromTriplets(st.begin(), st.end());

  const double lam = ep_.lambda, mu = ep_.shear;
  const double D[3][3] = {{lam + 2 * mu, lam, 0.0}, {lam, lam + 2 * mu, 0.0}, {0.0, 0.0, mu}};
  const double e0v[3] = {ep_.e0[0], ep_.e0[3], 2.0 * ep_.e0[1]};
  double de0[3];
  for (int r = 0; r < 3; ++r) de0[r] = D[r][0] * e0v[0] + D[r][1] * e0v[1] + D[r][2] * e0v[2];
  const double e0De0 = e0v[0] * de0[0] + e0v[1] * de0[1] + e0v[2] * de0[2];

  Triplets dw, ew;
  for (int k = 0; k < nq; ++k) {
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s)
        if (D[r][s] != 0.0) dw.emplace_back(3 * k + r, 3 * k + s, corner_w_[k] * D[r][s]);
      ew.emplace_back(static_cast<int>(corner_node_[static_cast<std::size_t>(k)]), 3 * k + r,
                      corner_w_[k] * de0[r]);
    }
  }
  SparseMatrix DW(3 * nq, 3 * nq), EW(N, 3 * nq);
  DW.setFromTriplets(dw.begin(), dw.end());
  EW.setFromTriplets(ew.begin(), ew.end());
  a_ = SparseMatrix(strain_.transpose() * DW * strain_);
  b_ = SparseMatrix(EW * strain_);
  d_ = g.quad_weights() * e0De0;

  // constraints: mean displacement and mean curl (d_x uy - d_y ux)
  Triplets ct;
  for (int k = 0; k < N; ++k) {
    ct.emplace_back(0, k, g.quad_weights()[k]);
    ct.emplace_back(1, N + k, g.quad_weights()[k]);
  }
  q = 0;
  for (int j = 0; j + 1 < g.ny(); ++j) {
    for (int i = 0; i + 1 < g.nx(); ++i) {
      for (int b = 0; b < 2; ++b) {
        for (int a = 0; a < 2; ++a, ++q) {
          const double wq = corner_w_[q];
          ct.emplace_back(2, N + static_cast<int>(g.node(i + 1, j + b)), wq / hx);
          ct.emplace_back(2, N + static_cast<int>(g.node(i, j + b)), -wq / hx);
          ct.emplace_back(2, static_cast<int>(g.node(i + a, j + 1)), -wq / hy);
          ct.emplace_back(2, static_cast<int>(g.node(i + a, j)), wq / hy);
        }
      }
    }
  }
  c_.resize(3, 2 * N);
  c_.setFromTriplets(ct.begin(), ct.end());
}

double ElasticOperator::energy(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const {
  return 0.5 * u.dot(a_ * u) - c.dot(b_ * u) + 0.5 * c.dot(d_.cwiseProduct(c));
}

Eigen::VectorXd ElasticOperator::grad_c(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const {
  return d_.cwiseProduct(c) - b_ * u;
}

Eigen::VectorXd ElasticOperator::grad_u(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const {
  return a_ * u - b_.transpose() * c;
}

double ElasticOperator::max_stress(const Eigen::VectorXd& c, const Eigen::VectorXd& u) const {
  const Eigen::VectorXd eps = strain_ * u;
  double m = 0.0;
  for (Eigen::Index k = 0; k < corner_w_.size(); ++k) {
    const double ck = c[static_cast<Eigen::Index>(corner_node_[static_cast<std::size_t>(k)])];
    const double exy = 0.5 * eps[3 * k + 2] - ck * ep_.e0[1];
    const std::array<double, 4> e{eps[3 * k] - ck * ep_.e0[0], exy, exy,
                                  eps[3 * k + 1] - ck * ep_.e0[3]};
    for (double s : ep_.stress(e)) m = std::max(m, std::abs(s));
  }
  return m;
}

Eigen::VectorXd ElasticOperator::solve(const Eigen::VectorXd& c) const {
  const Eigen::Index n2 = a_.rows();
  SparseMatrix M(n2 + 3, n2 + 3);
  Triplets t;
  for (int k = 0; k < a_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a_, k); it; ++it)
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int k = 0; k < c_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(c_, k); it; ++it) {
      t.emplace_back(static_cast<int>(n2 + it.row()), static_cast<int>(it.col()), it.value());
      t.emplace_back(static_cast<int>(it.col()), static_cast<int>(n2 + it.row()), it.value());
    }
  M.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n2 + 3);
  rhs.head(n2) = b_.transpose() * c;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success)
    throw SolverError("solve_elasticity: singular system (check constraints)", INFINITY);
  Eigen::VectorXd sol = lu.solve(rhs);
  Eigen::VectorXd u = sol.head(n2);
  const double res = inf_norm(grad_u(c, u));
  const double scale = inf_norm(rhs) + 1e-300;
  if (!(res <= 1e-8 * scale) && inf_norm(rhs) > 0.0)
    throw SolverError("solve_elasticity: residual too large", res);
  return u;
}

Field solve_elasticity(const Field& c, const ElasticParams& ep) {
  c.require_scalar();
  const ElasticOperator op(c.grid_ptr(), ep);
  return Field(c.grid_ptr(), op.solve(c.values()), 2);
}

}  // namespace chr
