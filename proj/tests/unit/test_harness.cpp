#include "chrflow/errors.hpp"
#include "chrflow/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

using namespace chr;

namespace {

std::string config_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  const RunConfig c = parse_config("{}");
  CHECK(c.dim == 1);
  CHECK(c.nodes[0] == 65);
  CHECK(c.solver == "weak");
  const RunConfig back = parse_config(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  const RunConfig e = parse_config(R"({"grid": {"dim": 2, "nodes": [9, 9]}, "elasticity": {"lambda": 2.0}})");
  REQUIRE(e.model.elasticity);
  CHECK(e.model.elasticity->lambda == 2.0);
  CHECK(parse_config(config_to_json(e)).model.elasticity->lambda == 2.0);
}

TEST_CASE("config errors name the key") {
  CHECK(config_key(R"({"grid": {"nodez": [3]}})") == "grid.nodez");
  CHECK(config_key(R"({"bogus": 1})") == "bogus");
  CHECK(config_key(R"({"elasticity": {"lambda": 1.0}})") == "elasticity");
  CHECK(config_key(R"({"rate": {"kind": "nope"}})") == "rate.kind");
  CHECK(config_key(R"({"time": {"T": -1.0}})") == "time");
  CHECK(config_key(R"({"grid": {"dim": 3}})") == "grid.dim");
  CHECK(config_key(R"({"solver": {"kind": "strong"}, "truncation": null})") == "truncation");
  CHECK(config_key("{\n\"grid\": {\n\"dim\": 1,,\n}}") == "line 3");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("scenarios") {
  const ModelParams p = reference_model();
  const double cs = equilibrium_root(p.free_energy, p.rate);
  CHECK(std::abs(p.rate.rate(cs, p.free_energy.eval(cs, 1))) < 1e-12);
  auto g = make_grid(1, {1.0, 0.0}, {33, 0});
  const Field a = random_perturbation(g, 0.5, 0.03, 7), b = random_perturbation(g, 0.5, 0.03, 7);
  CHECK(a.values() == b.values());
  CHECK((a.values().array() - 0.5).abs().maxCoeff() <= 0.03 + 1e-15);
  const Field bump = bump_field(g, 0.5, 0.05);
  CHECK(bump[0] == 0.5);
  CHECK(bump[16] == doctest::Approx(0.7));
}

TEST_CASE("run writes a trajectory and reports solver failure") {
  const auto dir = std::filesystem::temp_directory_path() / "chrflow_harness_test";
  std::filesystem::remove_all(dir);
  RunConfig c = parse_config(R"({"grid": {"nodes": [17]}, "time": {"T": 0.01, "steps": 5},
                                 "initial": {"kind": "cosine", "amplitude": 0.1}})");
  c.trajectory_path = (dir / "t.csv").string();
  c.snapshot_dir = (dir / "snap").string();
  c.snapshot_stride = 5;
  const RunOutcome out = run(c);
  CHECK(out.exit_code == 0);
  CHECK(std::filesystem::exists(c.trajectory_path));
  CHECK(std::filesystem::exists(dir / "snap" / "state_000005.csv"));

  RunConfig s = smallness_config();
  s.picard.max_outer = 2;
  const RunOutcome bad = run(s);
  CHECK(bad.exit_code == 3);
  CHECK(bad.diagnostic.find("history") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify report format and determinism") {
  const VerifyReport a = verify("physics", 5), b = verify("physics", 5);
  CHECK(a.ok());
  std::ostringstream sa, sb;
  a.write_csv(sa);
  b.write_csv(sb);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("check,s,T,lhs,rhs,margin,pass\n", 0) == 0);
  CHECK_THROWS_AS(verify("nope", 0), InvalidArgument);
  const Check c = make_check("x", 1.0, 2.0);
  CHECK(c.pass);
  CHECK(c.margin() == 1.0);
  CHECK_FALSE(make_check("y", NAN, 1.0).pass);
}

TEST_CASE("converge on the manufactured problem") {
  CHECK(manufactured_error(65, 1e-4, 0.05) < manufactured_error(33, 1e-4, 0.05));
  RunConfig c = parse_config(R"({"grid": {"nodes": [17]}, "time": {"T": 0.05, "steps": 2000},
                                 "solver": {"kind": "manufactured"}})");
  const ConvergeResult r = converge("space", c, 3, 2);
  CHECK(r.rows.size() == 3);
  CHECK(r.monotone);
  CHECK(r.order == doctest::Approx(2.0).epsilon(0.1));
  CHECK_THROWS_AS(converge("space", c, 2, 1), InvalidArgument);
  CHECK_THROWS_AS(converge("bogus", c, 3, 1), InvalidArgument);
}

TEST_CASE("criterion ids") {
  CHECK_THROWS_AS(run_criterion(0, 1), InvalidArgument);
  const CriterionResult r = run_criterion(4, 1);
  CHECK(r.pass);
  CHECK(r.checks.size() == 2);
}
