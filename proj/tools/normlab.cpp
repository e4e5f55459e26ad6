#include <cstdint>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "normlab/config.hpp"
#include "normlab/experiments.hpp"

// normlab <subcommand> --config <file> [--seed N] [--out DIR] [key=value ...]
//
// Precedence: config file, then positional key=value overrides, then the
// dedicated --seed/--out flags. Exit codes: 0 success, 2 bad configuration,
// 3 collapse or non-convergence under strict=true, 1 anything else.

namespace {

struct Args {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
};

CLI::App* add_sub(CLI::App& app, const std::string& name,
                  const std::string& desc, Args& args) {
  CLI::App* sub = app.add_subcommand(name, desc);
  sub->add_option("--config", args.config, "flat key = value config file");
  sub->add_option("--seed", args.seed, "top-level seed, wins over the file");
  sub->add_option("--out", args.out, "output directory, wins over the file");
  sub->add_option("overrides", args.overrides,
                  "key=value pairs applied on top of the file");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seeded embedding-norm experiments, one CSV artifact set per "
               "subcommand"};
  app.require_subcommand(1);

  Args args;
  using Command = int (*)(const normlab::ConfigMap&);
  const std::vector<std::pair<CLI::App*, Command>> commands = {
      {add_sub(app, "converge",
               "pair descent sweep over initial norm and pair angle", args),
       &normlab::cmd_converge},
      {add_sub(app, "wd_sweep",
               "pair descent sweep over weight-decay strength", args),
       &normlab::cmd_wd_sweep},
      {add_sub(app, "latent_train",
               "synthetic dataset, encoder training and retrieval analysis",
               args),
       &normlab::cmd_latent_train},
      {add_sub(app, "bound_check",
               "cosine-step bound trials plus the random-pair tail bound",
               args),
       &normlab::cmd_bound_check},
      {add_sub(app, "opphalves",
               "opposite-halves rate along a descent or training run", args),
       &normlab::cmd_opphalves},
      {add_sub(app, "potential",
               "loop integrals of the norm-scaled alignment field", args),
       &normlab::cmd_potential},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const auto& [sub, command] : commands) {
    if (!sub->parsed()) continue;
    try {
      normlab::ConfigMap cfg;
      if (sub->count("--config"))
        cfg = normlab::parse_config_file(args.config, sub->get_name());
      for (const std::string& token : args.overrides)
        normlab::apply_override(cfg, token, sub->get_name());
      if (sub->count("--seed")) cfg["seed"] = std::to_string(args.seed);
      if (sub->count("--out")) cfg["out"] = args.out;
      return command(cfg);
    } catch (const normlab::ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;  // unreachable with require_subcommand(1)
}
