#include "chrflow/sobolev.hpp"

#include "chrflow/errors.hpp"
#include "chrflow/operators.hpp"

#include <cmath>
#include <sstream>

namespace chr {

namespace {

void check_s(double s, bool allow_zero) {
  const bool ok = allow_zero ? (s >= 0.0 && s < 1.0) : (s > 0.0 && s < 1.0);
  if (!ok) {
    std::ostringstream msg;
    msg << "fractional order s = " << s << " outside " << (allow_zero ? "[0, 1)" : "(0, 1)");
    throw InvalidArgument(msg.str());
  }
}

// int_a^b r^p dr for p > -1
double power_integral(double a, double b, double p) {
  return (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / (p + 1.0);
}

double seminorm_sq(const std::vector<double>& u, double h, double s) {
  const std::size_t n = u.size() - 1;  // intervals
  // q_k = D(r_k) / r_k^2
  std::vector<double> q(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double d = (u[j + 1] - u[j]) / h;
    q[0] += h * d * d;
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t m = n - k;  // intervals of the x-range [0, T - r_k]
    if (m == 0) break;
    double acc = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      const double d = u[j + k] - u[j];
      acc += (j == 0 || j == m ? 0.5 : 1.0) * d * d;
    }
    const double r = static_cast<double>(k) * h;
    q[k] = h * acc / (r * r);
  }
  const double p = 1.0 - 2.0 * s;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = static_cast<double>(k) * h, b = a + h;
    // linear q on [a, b] against r^p
    const double i0 = power_integral(a, b, p);
    const double i1 = power_integral(a, b, p + 1.0);
    const double slope = (q[k + 1] - q[k]) / h;
    total += q[k] * i0 + slope * (i1 - a * i0);
  }
  return 2.0 * total;
}

double pl_l2_sq(const std::vector<double>& u, double h) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < u.size(); ++j)
    acc += h / 3.0 * (u[j] * u[j] + u[j] * u[j + 1] + u[j + 1] * u[j + 1]);
  return acc;
}

double weighted_sq(const Field& f) { return f.grid().quad_weights().dot(f.values().cwiseAbs2()); }

double k_form(const Field& f) {
  const SparseMatrix K = stiffness_matrix(f.grid());
  return f.values().dot(K * f.values());
}

double trapezoid(const std::vector<double>& v, double h) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    acc += (i == 0 || i + 1 == v.size() ? 0.5 : 1.0) * v[i];
  return h * acc;
}

Field second_difference(const Field& f, int axis) {
  const Grid& g = f.grid();
  const int n = g.count(axis);
  const double h = g.spacing(axis);
  Eigen::VectorXd d(f.values().size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int i = g.ix(k), j = g.iy(k);
    const int p = axis == 0 ? i : j;
    auto at = [&](int q) {
      if (q < 0) q = -q;
      if (q > n - 1) q = 2 * (n - 1) - q;
      return axis == 0 ? f[g.node(q, j)] : f[g.node(i, q)];
    };
    d[static_cast<Eigen::Index>(k)] = (at(p - 1) - 2.0 * at(p) + at(p + 1)) / (h * h);
  }
  return Field(f.grid_ptr(), std::move(d));
}

}  // namespace

void TimeSeries::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time series: T must be positive");
  if (values.size() < 3) throw InvalidArgument("time series: at least 3 samples required");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("time series: non-finite sample");
}

void FieldSeries::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("field series: T must be positive");
  if (values.size() < 3) throw InvalidArgument("field series: at least 3 samples required");
  for (const Field& f : values) {
    f.require_scalar();
    if (!(f.grid() == values.front().grid())) throw InvalidArgument("field series: grid mismatch");
  }
}

TimeSeries sample_series(double T, int n, const std::function<double(double)>& fn) {
  TimeSeries u;
  u.T = T;
  u.values.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) u.values[static_cast<std::size_t>(j)] = fn(T * j / (n - 1));
  u.validate();
  return u;
}

FieldSeries field_series(const Trajectory& traj) {
  FieldSeries u;
  u.T = traj.states.back().t - traj.states.front().t;
  for (const State& s : traj.states) u.values.push_back(s.c);
  u.validate();
  return u;
}

double gagliardo_seminorm(const TimeSeries& u, double s) {
  check_s(s, false);
  u.validate();
  return std::sqrt(std::max(seminorm_sq(u.values, u.spacing(), s), 0.0));
}

double l2_norm(const TimeSeries& u) {
  u.validate();
  return std::sqrt(pl_l2_sq(u.values, u.spacing()));
}

double derivative_l2_norm(const TimeSeries& u) {
  u.validate();
  const double h = u.spacing();
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < u.values.size(); ++j) {
    const double d = (u.values[j + 1] - u.values[j]) / h;
    acc += h * d * d;
  }
  return std::sqrt(acc);
}

double hr_norm(const Field& u, int r) {
  if (r < 0 || r > 4) throw InvalidArgument("hr_norm: order must be in 0..4");
  u.require_scalar();
  double acc = weighted_sq(u);
  if (r >= 1) acc += k_form(u);
  if (r >= 2) {
    const Field lap = laplacian(u);
    acc += weighted_sq(lap);
    if (r >= 3) acc += k_form(lap);
    if (r >= 4) acc += weighted_sq(laplacian(lap));
  }
  return std::sqrt(acc);
}

double aniso_norm(const FieldSeries& u, int r, double s) {
  if (r < 0 || r > 3) throw InvalidArgument("aniso_norm: spatial order must be in 0..3");
  check_s(s, true);
  u.validate();
  const double h = u.spacing();
  std::vector<double> space;
  for (const Field& f : u.values) {
    const double v = hr_norm(f, r);
    space.push_back(v * v);
  }
  double acc = trapezoid(space, h);
  const Grid& g = u.values.front().grid();
  const Eigen::VectorXd& w = g.quad_weights();
  std::vector<double> node(u.values.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (std::size_t j = 0; j < u.values.size(); ++j) node[j] = u.values[j][k];
    double t;
    if (s > 0.0) {
      t = seminorm_sq(node, h, s);
    } else {
      for (double& x : node) x *= x;
      t = trapezoid(node, h);
    }
    acc += w[static_cast<Eigen::Index>(k)] * t;
  }
  return std::sqrt(acc);
}

double h41_norm(const FieldSeries& u) {
  u.validate();
  const double h = u.spacing();
  std::vector<double> space;
  for (const Field& f : u.values) {
    const double v = hr_norm(f, 4);
    space.push_back(v * v);
  }
  double acc = trapezoid(space, h);
  for (std::size_t j = 1; j < u.values.size(); ++j) {
    const Field d(u.values[j].grid_ptr(), (u.values[j].values() - u.values[j - 1].values()) / h);
    acc += h * weighted_sq(d);
  }
  return std::sqrt(acc);
}

double hessian_l2(const Field& c) {
  c.require_scalar();
  const Grid& g = c.grid();
  double acc = weighted_sq(second_difference(c, 0));
  if (g.dim() == 2) {
    acc += weighted_sq(second_difference(c, 1));
    acc += 2.0 * weighted_sq(gradient_component(gradient_component(c, 0), 1));
  }
  return std::sqrt(acc);
}

BesovBound besov_bound(const TimeSeries& u, double s) {
  check_s(s, false);
  BesovBound b;
  b.lhs = gagliardo_seminorm(u, s);
  b.rhs = std::pow(u.T, 1.0 - s) / (s * std::sqrt(2.0 * (1.0 - s))) * derivative_l2_norm(u);
  return b;
}

TimeSeries reflect_extend(const TimeSeries& u, double T_target) {
  u.validate();
  if (!(T_target >= u.T)) throw InvalidArgument("reflect_extend: target must be at least T");
  const double h = u.spacing();
  const double steps = T_target / h;
  const long m = std::lround(steps);
  if (std::abs(steps - static_cast<double>(m)) > 1e-9 * std::max(1.0, steps))
    throw InvalidArgument("reflect_extend: target is not a multiple of the spacing");
  const long n = static_cast<long>(u.values.size()) - 1;
  TimeSeries out;
  out.T = static_cast<double>(m) * h;
  out.values.resize(static_cast<std::size_t>(m + 1));
  for (long j = 0; j <= m; ++j) {
    const long period = j % (2 * n);
    const long idx = period <= n ? period : 2 * n - period;
    out.values[static_cast<std::size_t>(j)] = u.values[static_cast<std::size_t>(idx)];
  }
  return out;
}

ExtensionBound extension_bound(const TimeSeries& u, double T_target, double s) {
  check_s(s, false);
  const TimeSeries e = reflect_extend(u, T_target);
  ExtensionBound b;
  b.constant = std::ceil(e.T / u.T - 1e-12);
  b.lhs = l2_norm(e) + gagliardo_seminorm(e, s);
  b.rhs = b.constant * ((1.0 + std::pow(u.T, -s)) * l2_norm(u) + gagliardo_seminorm(u, s));
  return b;
}

}  // namespace chr
