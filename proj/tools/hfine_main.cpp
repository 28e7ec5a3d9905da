#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hfine/commands.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config, "scenario config file")->required();
  cmd->add_option("--out", options.out_dir, "output directory");
  cmd->add_option("--seed", options.seed, "override the scenario seed");
  cmd->add_option("--threads", options.threads, "worker threads (1 = serial reference)");
}

int dispatch(const CommonOptions& options,
             int (*fn)(const hfine::Scenario&, const hfine::RunContext&)) {
  const hfine::Scenario scenario = hfine::load_scenario(options.config);
  hfine::RunContext ctx;
  ctx.out_dir = options.out_dir;
  ctx.seed_override = options.seed;
  ctx.threads = options.threads;
  return fn(scenario, ctx);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hfine: hyperfine-induced nuclear spin dynamics engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hfine::kVersion);

  CommonOptions options;
  int (*selected)(const hfine::Scenario&, const hfine::RunContext&) = nullptr;

  auto register_command = [&](const std::string& name, const std::string& description,
                              int (*fn)(const hfine::Scenario&, const hfine::RunContext&)) {
    CLI::App* cmd = app.add_subcommand(name, description);
    add_common(cmd, options);
    cmd->callback([&selected, fn] { selected = fn; });
  };

  register_command("steady-scan", "NV steady-state populations against the two-photon detuning",
                   hfine::cmd_steady_scan);
  register_command("n14-scan", "14N cooling curve and narrowing time against the pump strength",
                   hfine::cmd_n14_scan);
  register_command("cpt-scan", "averaged and post-selected CPT fluorescence against the readout field",
                   hfine::cmd_cpt_scan);
  register_command("narrowing", "13C bath distributions, metrics and the optimal-narrowing scan",
                   hfine::cmd_narrowing);
  register_command("squeezing-demo", "mean-field nonlinearity of a driven-damped two-level electron",
                   hfine::cmd_squeezing_demo);
  register_command("validate", "run the invariant suite against the scenario", hfine::cmd_validate);

  CLI11_PARSE(app, argc, argv);

  try {
    return dispatch(options, selected);
  } catch (const hfine::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const hfine::Error& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
