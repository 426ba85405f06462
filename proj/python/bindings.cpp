#include "chrflow/errors.hpp"
#include "chrflow/harness.hpp"
#include "chrflow/sobolev.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;

namespace {

chr::TimeSeries series(const std::vector<double>& values, double T) {
  chr::TimeSeries u;
  u.T = T;
  u.values = values;
  u.validate();
  return u;
}

py::dict check_dict(const chr::Check& c) {
  py::dict d;
  d["name"] = c.name;
  d["s"] = c.s;
  d["T"] = c.T;
  d["lhs"] = c.lhs;
  d["rhs"] = c.rhs;
  d["margin"] = c.margin();
  d["pass"] = c.pass;
  return d;
}

py::list check_list(const std::vector<chr::Check>& checks) {
  py::list out;
  for (const chr::Check& c : checks) out.append(check_dict(c));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cahn-Hilliard reaction solvers and fractional Sobolev tools";

  auto base = py::register_exception<chr::InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<chr::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<chr::SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<chr::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<chr::RangeError>(m, "RangeError", PyExc_ValueError);
  (void)base;

  m.def("resolve_config", [](const std::string& text) { return chr::config_to_json(chr::parse_config(text)); },
        py::arg("text"), "Validated config with defaults filled, as JSON text.");

  m.def(
      "run",
      [](const std::string& text) {
        chr::RunConfig cfg = chr::parse_config(text);
        cfg.trajectory_path.clear();
        cfg.snapshot_stride = 0;
        const chr::RunOutcome out = chr::run(cfg);
        const chr::Trajectory& t = out.trajectory;
        py::dict d;
        d["exit_code"] = out.exit_code;
        d["diagnostic"] = out.diagnostic;
        std::vector<double> times, energy, mass;
        Eigen::MatrixXd states;
        if (!t.states.empty()) {
          states.resize(static_cast<Eigen::Index>(t.states.size()), t.states.front().c.values().size());
          for (std::size_t i = 0; i < t.states.size(); ++i) {
            states.row(static_cast<Eigen::Index>(i)) = t.states[i].c.values().transpose();
            times.push_back(t.states[i].t);
          }
        }
        for (const chr::StepReport& r : t.reports) {
          energy.push_back(r.energy);
          mass.push_back(r.mass);
        }
        d["t"] = times;
        d["states"] = states;
        d["energy"] = energy;
        d["mass"] = mass;
        d["energy0"] = t.energy0;
        return d;
      },
      py::arg("config"), "Run a JSON config in memory; returns times, states, energies and masses.");

  m.def("verify", [](const std::string& suite, std::uint64_t seed) { return check_list(chr::verify(suite, seed).checks); },
        py::arg("suite") = "all", py::arg("seed") = 0);

  m.def(
      "run_criterion",
      [](int id, std::uint64_t seed) {
        const chr::CriterionResult r = chr::run_criterion(id, seed);
        py::dict d;
        d["id"] = r.id;
        d["title"] = r.title;
        d["pass"] = r.pass;
        d["seconds"] = r.seconds;
        d["detail"] = r.detail;
        d["checks"] = check_list(r.checks);
        return d;
      },
      py::arg("id"), py::arg("seed") = 42);

  m.def(
      "gagliardo_seminorm",
      [](const std::vector<double>& values, double T, double s) { return chr::gagliardo_seminorm(series(values, T), s); },
      py::arg("values"), py::arg("T"), py::arg("s"), "Seminorm of uniform samples on [0, T].");

  m.def(
      "besov_bound",
      [](const std::vector<double>& values, double T, double s) {
        const chr::BesovBound b = chr::besov_bound(series(values, T), s);
        return py::make_tuple(b.lhs, b.rhs);
      },
      py::arg("values"), py::arg("T"), py::arg("s"), "(seminorm, explicit bound)");

  m.def(
      "reference_equilibrium",
      [] {
        const chr::ModelParams p = chr::reference_model();
        return chr::equilibrium_root(p.free_energy, p.rate);
      },
      "Equilibrium concentration of the reference model.");

  m.def("manufactured_error", &chr::manufactured_error, py::arg("nodes"), py::arg("tau"), py::arg("T"));
}
