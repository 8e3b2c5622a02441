#include "nlobc/config.hpp"
#include "nlobc/error.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal elliptic solver with extended Neumann and oblique boundary conditions"};
  app.require_subcommand(1, 1);

  std::string config_path;
  nlobc::RunOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"solve", "Solve on the configured grid; writes solution.csv and history.csv"},
      {"flow", "Integrate the exterior flow from flow.points; writes flow.csv"},
      {"validate", "Check the configured data against the structural assumptions"},
      {"sweep", "Grid refinement over sweep.h; writes orders.csv"},
      {"mc-validate", "Compare the solver with the Monte Carlo oracle at mc.points; writes mc.csv"},
  };
  for (const auto& [name, help] : subs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Run-config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "Monte Carlo seed (overrides mc.seed)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nlobc::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) opts.out_dir = out_dir;
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--threads")) opts.threads = threads;

  nlobc::RunConfig cfg;
  try {
    cfg = nlobc::load_config(config_path);
  } catch (const nlobc::Error& e) {
    std::cerr << e.what() << "\n";
    return nlobc::kExitConfig;
  }
  return nlobc::run(sub->get_name(), std::move(cfg), opts, std::cout, std::cerr);
}
