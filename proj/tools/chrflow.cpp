#include "chrflow/errors.hpp"
#include "chrflow/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int config_error(const chr::ConfigError& e) {
  std::cerr << "config error: " << e.what() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chrflow: Cahn-Hilliard reaction solver harness"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "Run a configured simulation");
  run_cmd->add_option("config", config_path, "JSON config file")->required();
  run_cmd->add_flag("-q,--quiet", quiet, "Do not echo the resolved config");

  std::string suite = "all", csv_path;
  std::uint64_t seed = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Run a verification suite");
  verify_cmd->add_option("--suite", suite, "physics|operators|gradientflow|strongsolver|sobolev|all")
      ->check(CLI::IsMember({"physics", "operators", "gradientflow", "strongsolver", "sobolev", "all"}));
  verify_cmd->add_option("--seed", seed, "Random seed");
  verify_cmd->add_option("--csv", csv_path, "Write the check table here instead of stdout");

  std::string kind = "space", conv_config, conv_csv;
  int levels = 3;
  bool preasymptotic = false;
  auto* conv_cmd = app.add_subcommand("converge", "Refinement study");
  conv_cmd->add_option("--kind", kind, "space|time|picard")->check(CLI::IsMember({"space", "time", "picard"}));
  conv_cmd->add_option("--levels", levels, "Number of refinement levels")->check(CLI::Range(3, 12));
  conv_cmd->add_flag("--allow-preasymptotic", preasymptotic, "Do not fail on non-monotone errors");
  conv_cmd->add_option("--csv", conv_csv, "Write the table here instead of stdout");
  conv_cmd->add_option("config", conv_config, "JSON config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) {
      const chr::RunConfig cfg = chr::load_config(config_path);
      if (!quiet) std::cout << chr::config_to_json(cfg) << '\n';
      const chr::RunOutcome out = chr::run(cfg);
      if (out.exit_code != 0) {
        std::cerr << out.diagnostic << '\n';
        return out.exit_code;
      }
      if (!quiet && !cfg.trajectory_path.empty()) std::cerr << "wrote " << cfg.trajectory_path << '\n';
      return 0;
    }
    if (*verify_cmd) {
      const chr::VerifyReport rep = chr::verify(suite, seed);
      if (csv_path.empty()) {
        rep.write_csv(std::cout);
      } else {
        std::ofstream os(csv_path);
        rep.write_csv(os);
      }
      rep.write_text(std::cerr);
      return rep.ok() ? 0 : 1;
    }
    if (*conv_cmd) {
      const chr::RunConfig cfg = chr::load_config(conv_config);
      const chr::ConvergeResult r = chr::converge(kind, cfg, levels);
      if (conv_csv.empty()) {
        r.write_csv(std::cout);
      } else {
        std::ofstream os(conv_csv);
        r.write_csv(os);
      }
      if (!r.monotone) {
        std::cerr << (preasymptotic ? "warning" : "error") << ": errors are not monotone under refinement\n";
        if (!preasymptotic) return 1;
      }
      return 0;
    }
  } catch (const chr::ConfigError& e) {
    return config_error(e);
  } catch (const chr::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
