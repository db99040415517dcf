// raqsim: run RAQNet load-balancing experiments and parameter sweeps.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "raqlb/config.h"
#include "raqlb/experiment.h"

using namespace raqlb;

namespace {

void print_summary(const ExperimentResult& result) {
  for (const auto& run : result.runs) {
    fmt::print("{:<10} transfers={} ltc={:.6g} benefit={} max_util {:.4g} -> {:.4g}\n", to_string(run.mode),
               run.transfers.size(), run.ltc, run.benefit ? fmt::format("{:.4f}", *run.benefit) : "n/a",
               run.summary_before.max_utilization, run.summary_after.max_utilization);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAQNet virtual-server load balancing simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string mode = "all";
  std::uint64_t seed = 0;
  bool overwrite = false;

  auto* run = app.add_subcommand("run", "Run paired balancing modes on one scenario");
  run->add_option("--config", config_path, "Config file (key = value)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides config)");
  run->add_option("--mode", mode, "aware, unaware, directory or all")
      ->check(CLI::IsMember({"aware", "unaware", "directory", "all"}));
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides config)");
  run->add_flag("--overwrite", overwrite, "Write into a non-empty output directory");

  std::string param;
  std::vector<std::string> values;
  auto* sw = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sw->add_option("--config", config_path, "Config file (key = value)")->required();
  sw->add_option("--param", param, "ttl, desired_val, qlb or numVS")->required();
  sw->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sw->add_option("--out", out_dir, "Output directory")->required();
  sw->add_flag("--overwrite", overwrite, "Write into a non-empty output directory");

  auto* defaults = app.add_subcommand("defaults", "Print a config file with every key at its default");

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      write_config(std::cout, ExperimentConfig{});
      return 0;
    }
    ExperimentConfig config = load_config(config_path);
    if (run->parsed()) {
      if (*seed_opt) config.seed = seed;
      if (*out_opt) config.output_dir = out_dir;
      if (mode != "all") apply_setting(config, "modes", mode);
      config.overwrite = config.overwrite || overwrite;
      config.validate();
      auto result = run_experiment(config);
      write_outputs(result, config, config.output_dir, config.overwrite);
      print_summary(result);
    } else {
      auto which = parse_sweep_param(param);
      auto points = sweep(config, which, values);
      write_sweep_outputs(points, config, which, out_dir, overwrite || config.overwrite);
      for (const auto& p : points) {
        fmt::print("{}={}\n", to_string(which), p.value);
        print_summary(p.result);
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "raqsim: {}\n", e.what());
    return 1;
  }
  return 0;
}
