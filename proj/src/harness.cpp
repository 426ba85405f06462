#include "chrflow/harness.hpp"

#include "chrflow/errors.hpp"
#include "chrflow/operators.hpp"
#include "chrflow/sobolev.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace chr {

using json = nlohmann::json;

// ================================================================== scenarios

double equilibrium_root(const FreeEnergy& fe, const ReactionRate& r) {
  double lo = 1e-6, hi = 1.0 - 1e-6;
  auto phi = [&](double c) { return r.rate(c, fe.eval(c, 1)); };
  const bool pos_lo = phi(lo) > 0.0;
  if ((phi(hi) > 0.0) == pos_lo) throw InvalidArgument("equilibrium_root: no sign change on (0, 1)");
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    ((phi(mid) > 0.0) == pos_lo ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Field random_perturbation(const GridPtr& g, double base, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::array<double, 4> a{};
  double total = 0.0;
  for (double& x : a) {
    x = U(rng);
    total += std::abs(x);
  }
  for (double& x : a) x *= amplitude / total;
  const double lx = g->length(0), ly = g->dim() == 2 ? g->length(1) : 1.0;
  const bool two = g->dim() == 2;
  return sample(g, [&](double x, double y) {
    const double px = M_PI * x / lx, py = M_PI * y / ly;
    double v = base + a[0] * std::cos(px) + a[1] * std::cos(2.0 * px);
    if (two)
      v += a[2] * std::cos(py) + a[3] * std::cos(px) * std::cos(py);
    else
      v += a[2] * std::cos(3.0 * px) + a[3] * std::cos(4.0 * px);
    return v;
  });
}

Field bump_field(const GridPtr& g, double base, double amplitude) {
  const double lx = g->length(0), ly = g->dim() == 2 ? g->length(1) : 1.0;
  const bool two = g->dim() == 2;
  return sample(g, [&](double x, double y) {
    const double bx = 1.0 - std::cos(2.0 * M_PI * x / lx);
    double b = bx * bx;
    if (two) {
      const double by = 1.0 - std::cos(2.0 * M_PI * y / ly);
      b *= by * by;
    }
    return base + amplitude * b;
  });
}

ModelParams reference_model() {
  ModelParams p;
  p.free_energy.kind = FreeEnergyKind::regular_solution;
  p.free_energy.omega = 3.0;
  p.free_energy.kt = 1.0;
  p.rate.kind = RateKind::truncated_bv;
  p.rate.k_ins = 1.0;
  p.rate.k_ext = 1.0;
  p.rate.beta = 1.0;
  p.rate.mu_e = 0.0;
  p.rho = 1.0;
  p.truncation = 50.0;
  return p;
}

// ================================================================== config

namespace {

// Strict reader: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(name(), "expected an object");
  }
  ~Reader() = default;

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }

  double number(const std::string& k, double def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key(k), "must be finite");
    return d;
  }
  int integer(const std::string& k, int def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number_integer()) throw ConfigError(key(k), "expected an integer");
    return v.get<int>();
  }
  std::uint64_t uint(const std::string& k, std::uint64_t def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ConfigError(key(k), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_array()) throw ConfigError(key(k), "expected an array");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError(key(k), "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  std::string name() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void validated(const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

std::string rate_name(RateKind k) { return to_string(k); }

json model_json(const ModelParams& p) {
  json fe = {{"kind", to_string(p.free_energy.kind)},
             {"omega", p.free_energy.omega},
             {"kt", p.free_energy.kt},
             {"eps_dom", p.free_energy.eps_dom}};
  if (p.free_energy.clamp) fe["clamp"] = {(*p.free_energy.clamp)[0], (*p.free_energy.clamp)[1]};
  json r = {{"kind", rate_name(p.rate.kind)}, {"k_ins", p.rate.k_ins}, {"k_ext", p.rate.k_ext},
            {"beta", p.rate.beta},           {"mu_e", p.rate.mu_e},   {"kappa", p.rate.kappa},
            {"w_max", p.rate.w_max}};
  json out = {{"free_energy", fe}, {"rate", r}, {"rho", p.rho}};
  if (p.elasticity) {
    const ElasticParams& e = *p.elasticity;
    out["elasticity"] = {{"lambda", e.lambda}, {"shear", e.shear}, {"e0", e.e0}};
  } else {
    out["elasticity"] = nullptr;
  }
  out["truncation"] = p.truncation ? json(*p.truncation) : json(nullptr);
  return out;
}

}  // namespace

GridPtr RunConfig::grid() const { return make_grid(dim, extent, nodes); }

Field RunConfig::initial_field() const {
  const GridPtr g = grid();
  const InitialSpec& s = initial;
  if (s.kind == "constant") return sample(g, [&](double, double) { return s.base; });
  if (s.kind == "equilibrium") {
    const double c = equilibrium_root(model.free_energy, model.rate);
    return sample(g, [&](double, double) { return c; });
  }
  if (s.kind == "perturbation") return random_perturbation(g, s.base, s.amplitude, s.seed);
  if (s.kind == "bump") return bump_field(g, s.base, s.amplitude);
  if (s.kind == "cosine") {
    const double lx = g->length(0), ly = g->dim() == 2 ? g->length(1) : 1.0;
    const bool two = g->dim() == 2;
    return sample(g, [&](double x, double y) {
      return s.base + s.amplitude * std::cos(M_PI * x / lx) * (two ? std::cos(M_PI * y / ly) : 1.0);
    });
  }
  throw ConfigError("initial.kind", "unknown initial data kind '" + s.kind + "'");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < std::min<std::size_t>(e.byte, text.size()); ++k)
      if (text[k] == '\n') ++line;
    throw ConfigError("line " + std::to_string(line), std::string("JSON parse error: ") + e.what());
  }
  RunConfig c;
  Reader top(j, "");

  if (top.has("grid")) {
    Reader g(top.raw("grid"), "grid");
    c.dim = g.integer("dim", c.dim);
    if (c.dim != 1 && c.dim != 2) throw ConfigError("grid.dim", "must be 1 or 2");
    if (g.has("extent")) {
      const auto v = g.numbers("extent");
      if (static_cast<int>(v.size()) != c.dim) throw ConfigError("grid.extent", "needs one entry per dimension");
      c.extent = {v[0], c.dim == 2 ? v[1] : 0.0};
    } else if (c.dim == 2) {
      c.extent = {1.0, 1.0};
    }
    if (g.has("nodes")) {
      const auto v = g.numbers("nodes");
      if (static_cast<int>(v.size()) != c.dim) throw ConfigError("grid.nodes", "needs one entry per dimension");
      for (double x : v)
        if (x != std::floor(x)) throw ConfigError("grid.nodes", "expected integers");
      c.nodes = {static_cast<int>(v[0]), c.dim == 2 ? static_cast<int>(v[1]) : 0};
    } else if (c.dim == 2) {
      c.nodes = {17, 17};
    }
    g.finish();
    validated("grid", [&] { c.grid(); });
  }

  if (top.has("free_energy")) {
    Reader f(top.raw("free_energy"), "free_energy");
    FreeEnergy& fe = c.model.free_energy;
    validated("free_energy.kind", [&] { fe.kind = free_energy_kind_from_string(f.string("kind", to_string(fe.kind))); });
    fe.omega = f.number("omega", fe.omega);
    fe.kt = f.number("kt", fe.kt);
    fe.eps_dom = f.number("eps_dom", fe.eps_dom);
    if (f.has("clamp")) {
      const auto v = f.numbers("clamp");
      if (v.size() != 2) throw ConfigError("free_energy.clamp", "expected [lo, hi]");
      fe.clamp = std::array<double, 2>{v[0], v[1]};
    }
    f.finish();
    validated("free_energy", [&] { fe.validate(); });
  }

  if (top.has("rate")) {
    Reader r(top.raw("rate"), "rate");
    ReactionRate& rr = c.model.rate;
    validated("rate.kind", [&] { rr.kind = rate_kind_from_string(r.string("kind", to_string(rr.kind))); });
    rr.k_ins = r.number("k_ins", rr.k_ins);
    rr.k_ext = r.number("k_ext", rr.k_ext);
    rr.beta = r.number("beta", rr.beta);
    rr.mu_e = r.number("mu_e", rr.mu_e);
    rr.kappa = r.number("kappa", rr.kappa);
    rr.w_max = r.number("w_max", rr.w_max);
    r.finish();
    validated("rate", [&] { rr.validate(); });
  }

  c.model.rho = top.number("rho", c.model.rho);
  if (top.has("truncation")) {
    const json& t = top.raw("truncation");
    if (t.is_null()) {
      c.model.truncation.reset();
    } else {
      if (!t.is_number()) throw ConfigError("truncation", "expected a number or null");
      c.model.truncation = t.get<double>();
    }
  }
  if (top.has("elasticity")) {
    const json& e = top.raw("elasticity");
    if (!e.is_null()) {
      Reader r(e, "elasticity");
      ElasticParams ep;
      ep.lambda = r.number("lambda", ep.lambda);
      ep.shear = r.number("shear", ep.shear);
      if (r.has("e0")) {
        const auto v = r.numbers("e0");
        if (v.size() != 4) throw ConfigError("elasticity.e0", "expected 4 entries [xx, xy, yx, yy]");
        std::copy(v.begin(), v.end(), ep.e0.begin());
      }
      r.finish();
      c.model.elasticity = ep;
    }
  }

  if (top.has("time")) {
    Reader t(top.raw("time"), "time");
    c.time.T = t.number("T", c.time.T);
    c.time.n = t.integer("steps", c.time.n);
    t.finish();
    validated("time", [&] { c.time.validate(); });
  }

  if (top.has("solver")) {
    Reader s(top.raw("solver"), "solver");
    c.solver = s.string("kind", c.solver);
    if (c.solver != "weak" && c.solver != "strong" && c.solver != "manufactured")
      throw ConfigError("solver.kind", "must be weak, strong or manufactured");
    NewtonConfig& n = c.weak.newton;
    n.abs_tol = s.number("abs_tol", n.abs_tol);
    n.rel_tol = s.number("rel_tol", n.rel_tol);
    n.max_iter = s.integer("max_iter", n.max_iter);
    c.weak.fallback_iters = s.integer("fallback_iters", c.weak.fallback_iters);
    c.weak.energy_tol = s.number("energy_tol", c.weak.energy_tol);
    c.weak.telescoped_tol = s.number("telescoped_tol", c.weak.telescoped_tol);
    c.picard.tol = s.number("picard_tol", c.picard.tol);
    c.picard.max_outer = s.integer("max_outer", c.picard.max_outer);
    c.picard.compat_level = s.integer("compat_level", c.picard.compat_level);
    c.picard.lagged_start = s.boolean("lagged_start", c.picard.lagged_start);
    s.finish();
    validated("solver", [&] { n.validate(); });
    if (c.weak.fallback_iters < 0) throw ConfigError("solver.fallback_iters", "must be non-negative");
    if (!(c.picard.tol > 0.0)) throw ConfigError("solver.picard_tol", "must be positive");
    if (c.picard.max_outer < 1) throw ConfigError("solver.max_outer", "must be at least 1");
    if (c.picard.compat_level != 0 && c.picard.compat_level != 1)
      throw ConfigError("solver.compat_level", "must be 0 or 1");
  }

  if (top.has("initial")) {
    Reader i(top.raw("initial"), "initial");
    c.initial.kind = i.string("kind", c.initial.kind);
    c.initial.base = i.number("base", c.initial.base);
    c.initial.amplitude = i.number("amplitude", c.initial.amplitude);
    c.initial.seed = i.uint("seed", c.initial.seed);
    i.finish();
  }

  if (top.has("output")) {
    Reader o(top.raw("output"), "output");
    c.trajectory_path = o.string("trajectory", c.trajectory_path);
    c.snapshot_dir = o.string("snapshot_dir", c.snapshot_dir);
    c.snapshot_stride = o.integer("snapshot_stride", c.snapshot_stride);
    o.finish();
    if (c.snapshot_stride < 0) throw ConfigError("output.snapshot_stride", "must be non-negative");
    if (c.snapshot_stride > 0 && c.snapshot_dir.empty())
      throw ConfigError("output.snapshot_dir", "required when snapshot_stride > 0");
  }

  if (top.has("verify")) {
    Reader v(top.raw("verify"), "verify");
    c.check_detruncation = v.boolean("detruncation", c.check_detruncation);
    v.finish();
  }
  c.seed = top.uint("seed", c.seed);
  top.finish();

  // cross-field invariants
  if (c.model.elasticity && c.dim != 2) throw ConfigError("elasticity", "elasticity requires a 2D grid");
  if (c.solver == "strong") {
    if (c.model.elasticity) throw ConfigError("elasticity", "the strong solver has no elasticity");
    if (!c.model.truncation) {
      if (c.check_detruncation)
        throw ConfigError("truncation", "the strong solver needs a truncation level (or verify.detruncation = false)");
      c.model.truncation = 1e12;
    }
  }
  validated("model", [&] { c.model.validate(); });
  if (c.model.truncation) validated("truncation", [&] { Truncation{*c.model.truncation}.validate(); });
  validated("initial", [&] {
    const Field f = c.initial_field();
    if (!f.all_finite()) throw InvalidArgument("initial data is not finite");
  });
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("path", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  json grid = {{"dim", c.dim}};
  if (c.dim == 1) {
    grid["extent"] = {c.extent[0]};
    grid["nodes"] = {c.nodes[0]};
  } else {
    grid["extent"] = {c.extent[0], c.extent[1]};
    grid["nodes"] = {c.nodes[0], c.nodes[1]};
  }
  json m = model_json(c.model);
  json out = {{"grid", grid},
              {"free_energy", m["free_energy"]},
              {"rate", m["rate"]},
              {"rho", c.model.rho},
              {"truncation", m["truncation"]},
              {"elasticity", m["elasticity"]},
              {"time", {{"T", c.time.T}, {"steps", c.time.n}}},
              {"solver",
               {{"kind", c.solver},
                {"abs_tol", c.weak.newton.abs_tol},
                {"rel_tol", c.weak.newton.rel_tol},
                {"max_iter", c.weak.newton.max_iter},
                {"fallback_iters", c.weak.fallback_iters},
                {"energy_tol", c.weak.energy_tol},
                {"telescoped_tol", c.weak.telescoped_tol},
                {"picard_tol", c.picard.tol},
                {"max_outer", c.picard.max_outer},
                {"compat_level", c.picard.compat_level},
                {"lagged_start", c.picard.lagged_start}}},
              {"initial",
               {{"kind", c.initial.kind},
                {"base", c.initial.base},
                {"amplitude", c.initial.amplitude},
                {"seed", c.initial.seed}}},
              {"output",
               {{"trajectory", c.trajectory_path},
                {"snapshot_dir", c.snapshot_dir},
                {"snapshot_stride", c.snapshot_stride}}},
              {"verify", {{"detruncation", c.check_detruncation}}},
              {"seed", c.seed}};
  return out.dump(2);
}

// ================================================================== run

namespace {

// Manufactured biharmonic run on the config grid: c = e^{-t} prod cos(pi x_a / L_a).
Field manufactured_solution(const GridPtr& g, const TimeGrid& tg) {
  const double lx = g->length(0), ly = g->dim() == 2 ? g->length(1) : 1.0;
  const bool two = g->dim() == 2;
  const double kx = M_PI / lx, ky = two ? M_PI / ly : 0.0;
  const double k2 = kx * kx + ky * ky;
  auto shape = [&](double x, double y) { return std::cos(kx * x) * (two ? std::cos(ky * y) : 1.0); };
  BiharmonicStepper st(g, tg.tau());
  Field c = sample(g, shape);
  const Field s = sample(g, shape);
  for (int i = 1; i <= tg.n; ++i) {
    const double t = tg.time(i);
    const Eigen::VectorXd gi = (k2 * k2 - 1.0) * std::exp(-t) * s.values();
    c = st.step(c, gi, {}, {});
  }
  return c;
}

Field manufactured_exact(const GridPtr& g, double T) {
  const double lx = g->length(0), ly = g->dim() == 2 ? g->length(1) : 1.0;
  const bool two = g->dim() == 2;
  return sample(g, [&](double x, double y) {
    return std::exp(-T) * std::cos(M_PI * x / lx) * (two ? std::cos(M_PI * y / ly) : 1.0);
  });
}

std::string diagnostic_json(const std::string& what, const std::vector<double>& history, double residual) {
  json d = {{"error", what}};
  if (!history.empty()) d["history"] = history;
  if (std::isfinite(residual)) d["residual"] = residual;
  return d.dump();
}

void write_outputs(const RunConfig& cfg, const Trajectory& traj) {
  if (!cfg.trajectory_path.empty()) {
    const std::filesystem::path p(cfg.trajectory_path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(cfg.trajectory_path);
    if (!os) throw ConfigError("output.trajectory", "cannot write '" + cfg.trajectory_path + "'");
    write_trajectory_csv(os, traj);
  }
  if (cfg.snapshot_stride > 0) {
    std::filesystem::create_directories(cfg.snapshot_dir);
    for (std::size_t i = 0; i < traj.states.size(); i += static_cast<std::size_t>(cfg.snapshot_stride)) {
      char name[64];
      std::snprintf(name, sizeof name, "state_%06zu.csv", i);
      write_field_csv((std::filesystem::path(cfg.snapshot_dir) / name).string(), traj.states[i].c);
    }
  }
}

}  // namespace

RunOutcome run(const RunConfig& cfg) {
  RunOutcome out;
  const Field c0 = cfg.initial_field();
  try {
    if (cfg.solver == "weak") {
      out.trajectory = run_weak(c0, cfg.time, cfg.model, cfg.weak);
      if (out.trajectory.error) {
        out.exit_code = 3;
        out.diagnostic = diagnostic_json(*out.trajectory.error, {}, NAN);
      }
    } else if (cfg.solver == "strong") {
      out.trajectory = picard_solve(c0, cfg.model, cfg.time, cfg.picard);
      if (!cfg.check_detruncation) {
        for (auto& r : out.trajectory.reports) r.detrunc_ok = true;
        out.trajectory.strong->detrunc_ok = true;
      }
    } else {
      // manufactured biharmonic: only the final state is meaningful
      Trajectory t;
      t.tg = cfg.time;
      t.params_hash = params_hash(cfg.model);
      State s0{sample(c0.grid_ptr(), [](double, double) { return 0.0; }), Field(c0.grid_ptr()), {}, 0.0};
      s0.c = manufactured_exact(c0.grid_ptr(), 0.0);
      State s1{manufactured_solution(c0.grid_ptr(), cfg.time), Field(c0.grid_ptr()), {}, cfg.time.T};
      t.states = {s0, s1};
      StepReport r;
      r.i = 1;
      r.t = cfg.time.T;
      r.mass = integrate(s1.c);
      r.max_residual = (s1.c.values() - manufactured_exact(c0.grid_ptr(), cfg.time.T).values()).cwiseAbs().maxCoeff();
      t.reports = {r};
      out.trajectory = t;
    }
  } catch (const SolverError& e) {
    out.exit_code = 3;
    out.diagnostic = diagnostic_json(e.what(), e.history(), e.residual());
    return out;
  } catch (const DomainError& e) {
    out.exit_code = 3;
    out.diagnostic = diagnostic_json(e.what(), {}, NAN);
    return out;
  } catch (const RangeError& e) {
    out.exit_code = 3;
    out.diagnostic = diagnostic_json(e.what(), {}, NAN);
    return out;
  }
  write_outputs(cfg, out.trajectory);
  return out;
}

// ================================================================== verify

Check make_check(std::string name, double lhs, double rhs, double s, double T) {
  Check c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.s = s;
  c.T = T;
  c.pass = std::isfinite(lhs) && std::isfinite(rhs) && lhs <= rhs;
  return c;
}

bool VerifyReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void VerifyReport::append(const std::vector<Check>& more) {
  checks.insert(checks.end(), more.begin(), more.end());
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void VerifyReport::write_csv(std::ostream& os) const {
  os << "check,s,T,lhs,rhs,margin,pass\n";
  for (const Check& c : checks)
    os << c.name << ',' << num(c.s) << ',' << num(c.T) << ',' << num(c.lhs) << ',' << num(c.rhs)
       << ',' << num(c.margin()) << ',' << (c.pass ? "true" : "false") << '\n';
}

void VerifyReport::write_text(std::ostream& os) const {
  std::size_t failed = 0;
  for (const Check& c : checks) {
    if (c.pass) continue;
    ++failed;
    os << "FAIL " << c.name << " s=" << num(c.s) << " T=" << num(c.T) << " lhs=" << num(c.lhs)
       << " rhs=" << num(c.rhs) << '\n';
  }
  os << "suite " << suite << ": " << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  os << (failed ? "FAILED" : "OK") << '\n';
}

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::function<double(double)> random_smooth(std::mt19937_64& rng, double T) {
  std::uniform_real_distribution<double> A(-1.0, 1.0), P(0.0, 2.0 * M_PI), F(0.2, 4.0);
  std::vector<std::array<double, 3>> modes;
  for (int m = 0; m < 4; ++m) modes.push_back({A(rng), F(rng) * M_PI / T, P(rng)});
  return [modes](double t) {
    double v = 0.0;
    for (const auto& m : modes) v += m[0] * std::cos(m[1] * t + m[2]);
    return v;
  };
}

Field random_field(const GridPtr& g, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> U(lo, hi);
  Eigen::VectorXd v(g->size());
  for (auto& x : v) x = U(rng);
  return Field(g, v);
}

// ------------------------------------------------------------------ sobolev

std::vector<Check> besov_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 50; ++t) {
    for (double T : {0.5, 1.0, 2.0}) {
      const TimeSeries u = sample_series(T, 257, random_smooth(rng, T));
      for (double s : {0.125, 0.375, 0.5, 0.75}) {
        const BesovBound b = besov_bound(u, s);
        out.push_back(make_check("besov_bound", b.lhs, b.rhs * (1.0 + 1e-4), s, T));
      }
    }
  }
  return out;
}

std::vector<Check> scaling_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed + 1);
  for (double s : {0.125, 0.375, 0.5, 0.75}) {
    for (double T : {0.5, 2.0}) {
      const auto fn = random_smooth(rng, 1.0);
      const double ref = gagliardo_seminorm(sample_series(1.0, 8193, fn), s);
      const double rhs = std::pow(T, (1.0 - 2.0 * s) / 2.0) * ref;
      double prev = INFINITY;
      for (int n : {257, 513, 1025, 2049}) {
        const double lhs = gagliardo_seminorm(sample_series(T, n, [&](double t) { return fn(t / T); }), s);
        const double err = std::abs(lhs - rhs) / rhs;
        if (std::isfinite(prev)) out.push_back(make_check("scaling_decrease_n" + std::to_string(n), err, prev, s, T));
        prev = err;
      }
      out.push_back(make_check("scaling_identity", prev, 1e-3, s, T));
    }
  }
  return out;
}

std::vector<Check> extension_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed + 2);
  for (int t = 0; t < 50; ++t) {
    const double T = 0.5;
    const TimeSeries u = sample_series(T, 129, random_smooth(rng, T));
    for (double s : {0.25, 0.5, 0.75}) {
      const ExtensionBound b = extension_bound(u, 2.0, s);
      out.push_back(make_check("extension_bound", b.lhs, b.rhs, s, T));
    }
  }
  const TimeSeries tent = reflect_extend(sample_series(1.0, 65, [](double t) { return t; }), 2.0);
  out.push_back(make_check("extension_tent_l2", std::abs(l2_norm(tent) - std::sqrt(2.0 / 3.0)), 1e-12, NAN, 1.0));
  return out;
}

std::vector<Check> seminorm_property_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed + 3);
  for (int t = 0; t < 20; ++t) {
    const TimeSeries a = sample_series(1.5, 129, random_smooth(rng, 1.5));
    const TimeSeries b = sample_series(1.5, 129, random_smooth(rng, 1.5));
    TimeSeries sum = a, scaled = a;
    for (std::size_t j = 0; j < a.values.size(); ++j) {
      sum.values[j] += b.values[j];
      scaled.values[j] *= -2.5;
    }
    for (double s : {0.25, 0.75}) {
      const double na = gagliardo_seminorm(a, s), nb = gagliardo_seminorm(b, s);
      out.push_back(make_check("seminorm_triangle", gagliardo_seminorm(sum, s), (na + nb) * (1.0 + 1e-6), s, 1.5));
      out.push_back(make_check("seminorm_homogeneity", std::abs(gagliardo_seminorm(scaled, s) - 2.5 * na),
                               1e-6 * 2.5 * na, s, 1.5));
    }
  }
  double prev = NAN, prev_change = INFINITY;
  for (int n : {65, 129, 257, 513}) {
    const double v = gagliardo_seminorm(sample_series(2.0, n, [](double t) { return std::cos(t); }), 0.5);
    if (!std::isnan(prev)) {
      const double change = std::abs(v - prev);
      if (std::isfinite(prev_change))
        out.push_back(make_check("quadrature_cauchy_n" + std::to_string(n), change, prev_change, 0.5, 2.0));
      prev_change = change;
    }
    prev = v;
  }
  return out;
}

// ------------------------------------------------------------------ physics

std::vector<Check> physics_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed + 10);
  std::uniform_real_distribution<double> S(0.1, 0.9), W(-4.0, 4.0);
  std::vector<FreeEnergy> fes(3);
  fes[0].kind = FreeEnergyKind::quadratic;
  fes[1].kind = FreeEnergyKind::double_well;
  fes[2] = reference_model().free_energy;
  for (const FreeEnergy& fe : fes) {
    const std::string tag = to_string(fe.kind);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
      const double s = S(rng), h = 1e-5;
      for (int o = 0; o < 3; ++o) {
        const double fd = (fe.eval(s + h, o) - fe.eval(s - h, o)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - fe.eval(s, o + 1)) / (1.0 + std::abs(fe.eval(s, o + 1))));
      }
    }
    out.push_back(make_check("f_derivatives_" + tag, worst, 1e-6));
  }
  std::vector<ReactionRate> rates(3);
  rates[0].kind = RateKind::linear;
  rates[0].kappa = 1.3;
  rates[1] = reference_model().rate;
  rates[1].kind = RateKind::butler_volmer;
  rates[2] = reference_model().rate;
  for (const ReactionRate& r : rates) {
    const std::string tag = to_string(r.kind);
    double dw = 0.0, anti = 0.0, mono = 0.0;
    for (int t = 0; t < 50; ++t) {
      const double s = S(rng), w = W(rng), h = 1e-5;
      const double fd = (r.rate(s, w + h) - r.rate(s, w - h)) / (2.0 * h);
      dw = std::max(dw, std::abs(fd - r.rate_dw(s, w)) / (1.0 + std::abs(fd)));
      const double fa = (r.antiderivative(s, w + h) - r.antiderivative(s, w - h)) / (2.0 * h);
      anti = std::max(anti, std::abs(fa - r.rate(s, w)) / (1.0 + std::abs(fa)));
      const double w2 = W(rng);
      mono = std::max(mono, (r.rate(s, w2) - r.rate(s, w)) * (w2 - w));
    }
    out.push_back(make_check("rate_dw_" + tag, dw, 1e-6));
    out.push_back(make_check("rate_antiderivative_" + tag, anti, 1e-6));
    out.push_back(make_check("rate_monotone_" + tag, mono, 0.0));
  }
  return out;
}

// ------------------------------------------------------------------ operators

std::vector<Check> fenchel_checks(std::uint64_t seed) {
  std::vector<Check> out;
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const Field c = sample(g, [](double x, double) { return 0.3 + 0.4 * x; });
  ReactionRate lin;
  lin.kind = RateKind::linear;
  lin.kappa = 0.8;
  const ReactionRate tbv = reference_model().rate;
  std::mt19937_64 rng(seed + 20);
  for (const ReactionRate* r : std::array<const ReactionRate*, 2>{&lin, &tbv}) {
    double worst = -INFINITY;
    for (int t = 0; t < 100; ++t) {
      const Field vs = random_field(g, rng, -2.0, 2.0);
      const AstarResult a = conjugate_Astar(c, vs, *r);
      const double pairing = g->quad_weights().dot(vs.values().cwiseProduct(a.mu.values()));
      const double gap = std::abs(a.value + functional_A(c, a.mu, *r) - pairing);
      worst = std::max(worst, gap - 1e-8 * (1.0 + std::abs(a.value)));
    }
    out.push_back(make_check("fenchel_young_" + to_string(r->kind), worst, 0.0));
  }
  return out;
}

std::vector<Check> operator_checks(std::uint64_t seed) {
  std::vector<Check> out;
  std::mt19937_64 rng(seed + 30);
  for (int dim : {1, 2}) {
    auto g = dim == 1 ? make_grid(1, {1.0, 0.0}, {33, 0}) : make_grid(2, {1.0, 0.7}, {17, 13});
    const std::string tag = std::to_string(dim) + "d";
    const SparseMatrix K = stiffness_matrix(*g);
    out.push_back(make_check("stiffness_constants_" + tag, max_abs(K * Eigen::VectorXd::Ones(g->size())), 1e-10));
    const Field f = random_field(g, rng, -1.0, 1.0);
    const Eigen::VectorXd a = -(K * f.values()).cwiseQuotient(g->quad_weights());
    out.push_back(make_check("laplacian_identity_" + tag, max_abs(a - laplacian(f).values()),
                             1e-9 * (1.0 + max_abs(a))));
    Field rhs = random_field(g, rng, -1.0, 1.0);
    rhs.values().array() -= integrate(rhs) / g->volume();
    const Field u = solve_neumann_poisson(rhs);
    const Eigen::VectorXd res = K * u.values() - g->quad_weights().cwiseProduct(rhs.values());
    out.push_back(make_check("neumann_poisson_residual_" + tag, max_abs(res), 1e-9));
  }
  // bbar on random data
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const Field c = sample(g, [](double x, double) { return 0.4 + 0.2 * x; });
  const ReactionRate r = reference_model().rate;
  for (int t = 0; t < 10; ++t) {
    const Field vs = random_field(g, rng, -1.0, 1.0);
    const BbarResult b = bbar(c, vs, r);
    const Eigen::VectorXd res = apply_b(c, b.mu, r) - g->quad_weights().cwiseProduct(vs.values());
    out.push_back(make_check("bbar_residual", max_abs(res), 1e-8));
  }
  const auto fy = fenchel_checks(seed);
  out.insert(out.end(), fy.begin(), fy.end());
  return out;
}

// ------------------------------------------------------------------ gradientflow

std::vector<Check> energy_checks(const Trajectory& t) {
  std::vector<Check> out;
  const double scale = 1e-8 * std::abs(t.energy0);
  double step = -INFINITY, tele = -INFINITY;
  for (const StepReport& r : t.reports) {
    step = std::max(step, -r.step_slack);
    tele = std::max(tele, -r.telescoped_slack);
  }
  out.push_back(make_check("energy_step_slack", t.error ? INFINITY : step, scale, NAN, t.tg.T));
  out.push_back(make_check("energy_telescoped_slack", t.error ? INFINITY : tele, scale, NAN, t.tg.T));
  return out;
}

std::vector<Check> mass_flux_checks(const Trajectory& t) {
  double worst = t.error ? INFINITY : -INFINITY;
  const double tau = t.tg.tau();
  for (std::size_t i = 0; i < t.reports.size(); ++i) {
    const double m0 = i == 0 ? integrate(t.states[0].c) : t.reports[i - 1].mass;
    const StepReport& r = t.reports[i];
    worst = std::max(worst, std::abs(r.mass - m0 - tau * r.flux) - 1e-10 * (1.0 + std::abs(r.mass)));
  }
  return {make_check("mass_flux_identity", worst, 0.0, NAN, t.tg.T)};
}

double drift(const Trajectory& t, const Field& c0) {
  double d = 0.0;
  for (const State& s : t.states) d = std::max(d, max_abs(s.c.values() - c0.values()));
  return d;
}

std::vector<Check> equilibrium_checks(bool weak, bool strong) {
  std::vector<Check> out;
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const TimeGrid tg{0.1, 100};
  for (RateKind kind : {RateKind::butler_volmer, RateKind::truncated_bv}) {
    ModelParams p = reference_model();
    p.rate.kind = kind;
    const std::string tag = "_" + to_string(kind);
    const double cs = equilibrium_root(p.free_energy, p.rate);
    const Field c0 = sample(g, [&](double, double) { return cs; });
    if (weak) {
      const Trajectory w = run_weak(c0, tg, p);
      out.push_back(make_check("equilibrium_drift_weak" + tag, w.error ? INFINITY : drift(w, c0), 1e-9, NAN, tg.T));
      const auto e = energy_checks(w);
      out.insert(out.end(), e.begin(), e.end());
      const auto m = mass_flux_checks(w);
      out.insert(out.end(), m.begin(), m.end());
    }
    if (strong) {
      double d = INFINITY;
      try {
        d = drift(picard_solve(c0, p, tg), c0);
      } catch (const std::exception&) {
      }
      out.push_back(make_check("equilibrium_drift_picard" + tag, d, 1e-9, NAN, tg.T));
    }
  }
  return out;
}

std::vector<Check> elasticity_checks() {
  std::vector<Check> out;
  auto g = make_grid(2, {1.0, 1.0}, {11, 11});
  ElasticParams ep;
  ep.lambda = 1.5;
  ep.shear = 0.7;
  ep.e0 = {0.02, 0.0, 0.0, 0.02};
  const Field c = sample(g, [](double, double) { return 0.6; });
  const Field u = solve_elasticity(c, ep);
  out.push_back(make_check("uniform_eigenstrain_stress", ElasticOperator(g, ep).max_stress(c.values(), u.values()), 1e-10));

  ModelParams p = reference_model();
  auto g2 = make_grid(2, {1.0, 1.0}, {9, 9});
  const Field c0 = random_perturbation(g2, 0.5, 0.15, 6);
  const TimeGrid tg{0.02, 20};
  const Trajectory plain = run_weak(c0, tg, p);
  p.elasticity = ElasticParams{};
  const Trajectory el = run_weak(c0, tg, p);
  double d = plain.error || el.error ? INFINITY : 0.0;
  if (!plain.error && !el.error)
    for (std::size_t i = 0; i < plain.states.size(); ++i)
      d = std::max(d, max_abs(plain.states[i].c.values() - el.states[i].c.values()));
  out.push_back(make_check("zero_misfit_matches_plain", d, 1e-10, NAN, tg.T));
  return out;
}

// ------------------------------------------------------------------ strongsolver

std::vector<Check> manufactured_checks() {
  std::vector<Check> out;
  RunConfig c;
  c.solver = "manufactured";
  c.nodes = {33, 0};
  c.time = TimeGrid{0.1, 4000};
  const ConvergeResult sp = converge("space", c, 3, 0);
  out.push_back(make_check("biharmonic_space_order_lo", 1.7, sp.order));
  out.push_back(make_check("biharmonic_space_order_hi", sp.order, 2.3));
  c.nodes = {65, 0};
  c.time = TimeGrid{0.1, 250};
  const ConvergeResult tm = converge("time", c, 3, 0);
  out.push_back(make_check("biharmonic_time_order_lo", 0.8, tm.order));
  out.push_back(make_check("biharmonic_time_order_hi", tm.order, 1.2));
  return out;
}

std::vector<Check> mean_identity_checks() {
  auto g = make_grid(2, {1.0, 0.5}, {17, 9});
  BiharmonicData data;
  data.g = [&](double t) { return sample(g, [&](double x, double y) { return std::sin(3 * x + t) * y; }); };
  auto face = [&](double t, double shift) {
    std::vector<double> v;
    for (std::size_t k = 0; k < g->boundary().size(); ++k) v.push_back(std::cos(0.7 * static_cast<double>(k) + t + shift));
    return v;
  };
  data.beta_bc = [&](double t) { return face(t, 0.0); };
  data.alpha_bc = [&](double t) { return face(t, 1.0); };
  Field c0 = sample(g, [&](double x, double y) { return std::cos(M_PI * x) * std::cos(2 * M_PI * y); });
  const double tau = 2e-3;
  double worst = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double t = i * tau;
    const Field c1 = biharmonic_step(c0, data, tau, t);
    const double lhs = integrate(c1) - integrate(c0);
    const double rhs = tau * (integrate(data.g(t)) - boundary_source(*g, data.beta_bc(t)).sum());
    worst = std::max(worst, std::abs(lhs - rhs));
    c0 = c1;
  }
  return {make_check("biharmonic_mean_identity", worst, 1e-10)};
}

std::vector<Check> cross_solver_checks(std::uint64_t seed) {
  const RunConfig cfg = energy_config(seed);
  const Field c0 = cfg.initial_field();
  const Trajectory w = run_weak(c0, cfg.time, cfg.model, cfg.weak);
  double diff = INFINITY;
  try {
    const Trajectory s = picard_solve(c0, cfg.model, cfg.time, cfg.picard);
    if (!w.error) diff = l2_norm(Field(c0.grid_ptr(), s.states.back().c.values() - w.states.back().c.values()));
  } catch (const std::exception&) {
  }
  const double h = c0.grid().hx();
  const double bound = 5.0 * (cfg.time.tau() + h * h) * l2_norm(c0);
  return {make_check("cross_solver_l2", diff, bound, NAN, cfg.time.T)};
}

std::vector<Check> smallness_checks() {
  std::vector<Check> out;
  RunConfig cfg = smallness_config();
  cfg.trajectory_path.clear();
  const ConvergeResult r = converge("picard", cfg, 3, 0);
  for (std::size_t k = 1; k < r.rows.size(); ++k) {
    const auto& a = r.rows[k - 1];
    const auto& b = r.rows[k];
    out.push_back(make_check("smallness_measure_nonincreasing", b.error, a.error, NAN, b.param));
    Check c = make_check("picard_contraction_improves", b.extra, a.extra, NAN, b.param);
    c.pass = c.pass && b.extra < a.extra;
    out.push_back(c);
  }
  if (r.rows.size() != 3) out.push_back(make_check("smallness_levels_converged", INFINITY, 0.0));
  // detruncation and strong residual on the same data
  const Field c0 = cfg.initial_field();
  try {
    const Trajectory t = picard_solve(c0, cfg.model, cfg.time, cfg.picard);
    const DetruncationResult d = detruncate_check(t, Truncation{*cfg.model.truncation});
    out.push_back(make_check("smallness_detruncation", d.ok ? 0.0 : 1.0, 0.0, NAN, cfg.time.T));
    double res = 0.0;
    for (double v : strong_residuals(t, cfg.model, true)) res = std::max(res, v);
    out.push_back(make_check("picard_strong_residual", res, 10.0 * cfg.picard.tol, NAN, cfg.time.T));
    const auto a = strong_residuals(t, cfg.model, true), b = strong_residuals(t, cfg.model, false);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i] == b[i];
    out.push_back(make_check("detruncated_residual_identical", same ? 0.0 : 1.0, 0.0, NAN, cfg.time.T));
  } catch (const std::exception&) {
    out.push_back(make_check("smallness_detruncation", INFINITY, 0.0, NAN, cfg.time.T));
  }
  return out;
}

std::vector<Check> suite_checks(const std::string& suite, std::uint64_t seed) {
  std::vector<Check> out;
  auto add = [&](const std::vector<Check>& v) { out.insert(out.end(), v.begin(), v.end()); };
  if (suite == "physics") {
    add(physics_checks(seed));
  } else if (suite == "operators") {
    add(operator_checks(seed));
    add({elasticity_checks().front()});
  } else if (suite == "gradientflow") {
    const RunConfig cfg = energy_config(seed);
    const Trajectory t = run_weak(cfg.initial_field(), cfg.time, cfg.model, cfg.weak);
    add(energy_checks(t));
    add(mass_flux_checks(t));
    add(equilibrium_checks(true, false));
    add(elasticity_checks());
  } else if (suite == "strongsolver") {
    add(manufactured_checks());
    add(mean_identity_checks());
    add(equilibrium_checks(false, true));
    add(cross_solver_checks(seed));
    add(smallness_checks());
  } else if (suite == "sobolev") {
    add(besov_checks(seed));
    add(scaling_checks(seed));
    add(extension_checks(seed));
    add(seminorm_property_checks(seed));
  } else {
    throw InvalidArgument("unknown suite '" + suite + "'");
  }
  for (Check& c : out) c.name = suite + "." + c.name;
  return out;
}

}  // namespace

VerifyReport verify(const std::string& suite, std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = suite;
  if (suite == "all") {
    for (const char* s : {"physics", "operators", "gradientflow", "strongsolver", "sobolev"})
      rep.append(suite_checks(s, seed));
  } else {
    rep.append(suite_checks(suite, seed));
  }
  return rep;
}

// ================================================================== converge

void ConvergeResult::write_csv(std::ostream& os) const {
  os << "kind,level,param,error,diff,order,contraction\n";
  for (const ConvergeRow& r : rows)
    os << kind << ',' << r.level << ',' << num(r.param) << ',' << num(r.error) << ',' << num(r.diff)
       << ',' << num(r.order) << ',' << num(r.extra) << '\n';
  os << kind << ",fit,,,," << num(order) << ",\n";
}

double manufactured_error(int nodes, double tau, double T) {
  auto g = make_grid(1, {1.0, 0.0}, {nodes, 0});
  const int steps = static_cast<int>(std::lround(T / tau));
  const Field c = manufactured_solution(g, TimeGrid{T, steps});
  return max_abs(c.values() - manufactured_exact(g, T).values());
}

namespace {

int thread_cap(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("CHRFLOW_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <class T>
std::vector<T> run_levels(int levels, int cap, const std::function<T(int)>& fn) {
  std::vector<T> out(static_cast<std::size_t>(levels));
  for (int start = 0; start < levels; start += cap) {
    std::vector<std::future<T>> fut;
    const int stop = std::min(levels, start + cap);
    for (int k = start; k < stop; ++k) fut.push_back(std::async(std::launch::async, fn, k));
    for (int k = start; k < stop; ++k) out[static_cast<std::size_t>(k)] = fut[static_cast<std::size_t>(k - start)].get();
  }
  return out;
}

Field final_state(const RunConfig& cfg) {
  if (cfg.solver == "manufactured") return manufactured_solution(cfg.grid(), cfg.time);
  const Field c0 = cfg.initial_field();
  if (cfg.solver == "strong") return picard_solve(c0, cfg.model, cfg.time, cfg.picard).states.back().c;
  const Trajectory t = run_weak(c0, cfg.time, cfg.model, cfg.weak);
  if (t.error) throw SolverError("converge: weak run failed: " + *t.error, NAN);
  return t.states.back().c;
}

// max difference at the nodes shared with the coarser grid
double coarse_diff(const Field& coarse, const Field& fine) {
  const Grid& gc = coarse.grid();
  const Grid& gf = fine.grid();
  const int rx = (gf.nx() - 1) / (gc.nx() - 1);
  const int ry = gc.dim() == 2 ? (gf.ny() - 1) / (gc.ny() - 1) : 1;
  double d = 0.0;
  for (std::size_t k = 0; k < gc.size(); ++k)
    d = std::max(d, std::abs(coarse[k] - fine[gf.node(gc.ix(k) * rx, gc.iy(k) * ry)]));
  return d;
}

void fit_orders(ConvergeResult& r) {
  const std::size_t m = r.rows.size();
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < m; ++k) {
    const double d = r.rows[k].diff;
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    xs.push_back(std::log(r.rows[k].param));
    ys.push_back(std::log(d));
    if (k > 0 && r.rows[k - 1].diff > 0.0)
      r.rows[k].order = std::log(r.rows[k - 1].diff / d) / std::log(r.rows[k - 1].param / r.rows[k].param);
  }
  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    r.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  for (std::size_t k = 1; k < m; ++k)
    if (!(r.rows[k].error < r.rows[k - 1].error)) r.monotone = false;
}

}  // namespace

ConvergeResult converge(const std::string& kind, const RunConfig& cfg, int levels, int threads) {
  if (levels < 3) throw InvalidArgument("converge: at least 3 levels required");
  const int cap = thread_cap(threads);
  ConvergeResult r;
  r.kind = kind;
  if (kind == "space" || kind == "time") {
    std::vector<RunConfig> cfgs;
    for (int k = 0; k < levels; ++k) {
      RunConfig c = cfg;
      c.trajectory_path.clear();
      c.snapshot_stride = 0;
      const int f = 1 << k;
      if (kind == "space") {
        c.nodes[0] = (cfg.nodes[0] - 1) * f + 1;
        if (cfg.dim == 2) c.nodes[1] = (cfg.nodes[1] - 1) * f + 1;
      } else {
        c.time.n = cfg.time.n * f;
      }
      cfgs.push_back(c);
    }
    const std::vector<Field> finals =
        run_levels<Field>(levels, cap, [&](int k) { return final_state(cfgs[static_cast<std::size_t>(k)]); });
    for (int k = 0; k < levels; ++k) {
      ConvergeRow row;
      row.level = k;
      const RunConfig& c = cfgs[static_cast<std::size_t>(k)];
      row.param = kind == "space" ? c.grid()->hx() : c.time.tau();
      if (k + 1 < levels) {
        const Field& a = finals[static_cast<std::size_t>(k)];
        const Field& b = finals[static_cast<std::size_t>(k + 1)];
        row.diff = kind == "space" ? coarse_diff(a, b) : max_abs(a.values() - b.values());
      }
      if (cfg.solver == "manufactured")
        row.error = max_abs(finals[static_cast<std::size_t>(k)].values() -
                            manufactured_exact(finals[static_cast<std::size_t>(k)].grid_ptr(), c.time.T).values());
      else
        row.error = row.diff;
      r.rows.push_back(row);
    }
    if (cfg.solver != "manufactured") r.rows.pop_back();  // no reference for the finest level
    fit_orders(r);
    if (cfg.solver != "manufactured") {
      // self-convergence: the last difference has no successor
      r.monotone = true;
      for (std::size_t k = 1; k < r.rows.size(); ++k)
        if (!(r.rows[k].diff < r.rows[k - 1].diff)) r.monotone = false;
    }
    return r;
  }
  if (kind == "picard") {
    struct Level {
      double measure = NAN, ratio = NAN;
    };
    const double tau = cfg.time.tau();
    const std::vector<Level> lv = run_levels<Level>(levels, cap, [&](int k) {
      RunConfig c = cfg;
      c.time.T = cfg.time.T / (1 << k);
      c.time.n = static_cast<int>(std::lround(c.time.T / tau));
      const Trajectory t = picard_solve(c.initial_field(), c.model, c.time, c.picard);
      Level l;
      double hess = 0.0;
      for (const State& s : t.states) hess = std::max(hess, hessian_l2(s.c));
      l.measure = h41_norm(field_series(t)) + hess;
      l.ratio = 0.0;
      for (double q : t.strong->contraction) l.ratio = std::max(l.ratio, q);
      return l;
    });
    for (int k = 0; k < levels; ++k) {
      ConvergeRow row;
      row.level = k;
      row.param = cfg.time.T / (1 << k);
      row.error = lv[static_cast<std::size_t>(k)].measure;
      row.extra = lv[static_cast<std::size_t>(k)].ratio;
      r.rows.push_back(row);
    }
    for (int k = 1; k < levels; ++k) {
      const auto& a = r.rows[static_cast<std::size_t>(k - 1)];
      const auto& b = r.rows[static_cast<std::size_t>(k)];
      if (!(b.error <= a.error) || !(b.extra < a.extra)) r.monotone = false;
    }
    return r;
  }
  throw InvalidArgument("converge: kind must be space, time or picard");
}

// ================================================================== acceptance

RunConfig energy_config(std::uint64_t seed) {
  RunConfig c;
  c.dim = 1;
  c.extent = {1.0, 0.0};
  c.nodes = {65, 0};
  c.model = reference_model();
  c.time = TimeGrid{0.05, 50};
  c.initial = InitialSpec{"perturbation", 0.5, 0.03, seed};
  c.picard.compat_level = 0;
  c.trajectory_path.clear();
  return c;
}

RunConfig smallness_config() {
  RunConfig c;
  c.dim = 1;
  c.extent = {1.0, 0.0};
  c.nodes = {65, 0};
  c.model = reference_model();
  c.model.rate.k_ins = 0.5;  // equilibrium at c = 1/2
  c.time = TimeGrid{0.1, 100};
  c.solver = "strong";
  c.initial = InitialSpec{"bump", 0.5, 0.05, 0};
  c.trajectory_path.clear();
  return c;
}

CriterionResult run_criterion(int id, std::uint64_t seed) {
  CriterionResult r;
  r.id = id;
  const auto t0 = std::chrono::steady_clock::now();
  switch (id) {
    case 1:
      r.title = "Besov seminorm bound with explicit constant";
      r.budget = 10.0;
      r.checks = besov_checks(seed);
      break;
    case 2:
      r.title = "Gagliardo scaling identity under refinement";
      r.budget = 10.0;
      r.checks = scaling_checks(seed);
      break;
    case 3:
    case 5: {
      const RunConfig cfg = energy_config(seed);
      const Trajectory t = run_weak(cfg.initial_field(), cfg.time, cfg.model, cfg.weak);
      if (id == 3) {
        r.title = "Per-step and telescoped energy estimate";
        r.budget = 60.0;
        r.checks = energy_checks(t);
      } else {
        r.title = "Discrete mass-flux identity";
        r.checks = mass_flux_checks(t);
      }
      break;
    }
    case 4:
      r.title = "Fenchel-Young equality for A and A*";
      r.budget = 30.0;
      r.checks = fenchel_checks(seed);
      break;
    case 6:
      r.title = "Biharmonic manufactured-solution orders";
      r.budget = 120.0;
      r.checks = manufactured_checks();
      break;
    case 7:
      r.title = "Equilibrium fidelity (weak and Picard)";
      r.checks = equilibrium_checks(true, true);
      r.checks.erase(std::remove_if(r.checks.begin(), r.checks.end(),
                                    [](const Check& c) { return c.name.rfind("equilibrium_drift", 0) != 0; }),
                     r.checks.end());
      break;
    case 8:
      r.title = "Weak vs strong agreement";
      r.checks = cross_solver_checks(seed);
      break;
    case 9:
      r.title = "Smallness trend as T decreases";
      r.checks = smallness_checks();
      r.checks.erase(std::remove_if(r.checks.begin(), r.checks.end(),
                                    [](const Check& c) {
                                      return c.name != "smallness_measure_nonincreasing" &&
                                             c.name != "picard_contraction_improves" &&
                                             c.name != "smallness_levels_converged";
                                    }),
                     r.checks.end());
      break;
    case 10:
      r.title = "Elasticity zero-stress and zero-misfit checks";
      r.checks = elasticity_checks();
      break;
    default:
      throw InvalidArgument("criterion id must be 1..10");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = !r.checks.empty() &&
           std::all_of(r.checks.begin(), r.checks.end(), [](const Check& c) { return c.pass; });
  if (r.budget > 0.0 && r.seconds > r.budget) r.pass = false;
  std::size_t failed = 0;
  const Check* worst = nullptr;
  for (const Check& c : r.checks) {
    if (!c.pass) ++failed;
    if (!worst || c.margin() < worst->margin()) worst = &c;
  }
  std::ostringstream d;
  d << r.checks.size() - failed << "/" << r.checks.size() << " checks";
  if (worst) d << ", tightest " << worst->name << " lhs=" << num(worst->lhs) << " rhs=" << num(worst->rhs);
  d << std::fixed << std::setprecision(2) << ", " << r.seconds << "s";
  if (r.budget > 0.0) d << " (budget " << r.budget << "s)";
  r.detail = d.str();
  return r;
}

}  // namespace chr
