#include "raqlb/experiment.h"

#include <fmt/format.h>
#include <fmt/os.h>

#include <stdexcept>

#include "raqlb/random.h"

namespace raqlb {

namespace fs = std::filesystem;

Scenario build_scenario(const ExperimentConfig& config) {
  config.validate();
  const std::uint64_t topo_seed = derive_seed(config.seed, "topology");
  const std::uint64_t overlay_seed = derive_seed(config.seed, "overlay");
  const std::uint64_t workload_seed = derive_seed(config.seed, "workload");

  Scenario s;
  auto topo = generate_transit_stub(config.topology, topo_seed);
  Rng attach_rng(derive_seed(topo_seed, "attach"));
  s.attachments = attach_hosts(topo, config.nodes, attach_rng);

  auto latencies = latency_matrix(topo, s.attachments);
  auto coords = embed_coordinates(latencies, config.embedding, derive_seed(topo_seed, "coordinates"));
  switch (config.oracle) {
    case OracleMode::kExact:
      s.oracle = std::make_unique<DistanceOracle>(
          DistanceOracle::from_matrix(OracleMode::kExact, std::move(latencies), std::move(coords)));
      break;
    case OracleMode::kCoordinate:
      s.oracle = std::make_unique<DistanceOracle>(DistanceOracle::from_coordinates(std::move(coords)));
      break;
    case OracleMode::kHops:
      s.oracle = std::make_unique<DistanceOracle>(
          DistanceOracle::from_matrix(OracleMode::kHops, hop_matrix(topo, s.attachments), std::move(coords)));
      break;
  }

  Rng workload_rng(workload_seed);
  Rng overlay_rng(overlay_seed);
  s.overlay = std::make_unique<Overlay>(Box::unit(config.dims));
  double total_capacity = 0.0;
  for (std::size_t i = 0; i < config.nodes; ++i) {
    double cap = sample_capacity(config.capacity, workload_rng);
    total_capacity += cap;
    s.overlay->add_node(cap, s.attachments[i]);
  }
  const int num_vs = config.num_vs();
  for (HostId h = 0; h < config.nodes; ++h) s.overlay->join_node(h, num_vs, overlay_rng);
  s.overlay->build_routing_tables({config.routing_fill, s.oracle.get(), derive_seed(overlay_seed, "routing")});

  LoadModel model;
  model.mu = config.mu_fraction * total_capacity;
  model.sigma = config.resolved_sigma_fraction() * model.mu;
  s.load_assignment = assign_loads(*s.overlay, model, workload_rng);
  return s;
}

ModeRun run_mode(const Scenario& scenario, const ExperimentConfig& config, BalanceMode mode) {
  Overlay overlay = *scenario.overlay;
  const auto& oracle = *scenario.oracle;
  LBParams params = config.lb;
  params.num_vs = config.num_vs();
  const std::uint64_t seed = derive_seed(config.seed, "balancing");

  ModeRun run;
  run.mode = mode;
  run.summary_before = utilization_scatter(overlay);
  run.before = run.summary_before.points;
  for (int r = 1; r <= config.rounds; ++r) {
    auto report = run_balancing_round(overlay, params, oracle, mode, r, seed);
    run.transfers.insert(run.transfers.end(), report.transfers.begin(), report.transfers.end());
    run.rounds.push_back(std::move(report));
  }
  run.summary_after = utilization_scatter(overlay);
  run.after = run.summary_after.points;
  for (HostId h = 0; h < overlay.node_count(); ++h) run.in_degree.push_back(overlay.node(h).in_degree);
  run.ltc = load_transfer_cost(run.transfers);
  run.heavy_after = count_heavy_nodes(overlay, params, oracle, mode, derive_seed(seed, "final"));
  return run;
}

const ModeRun* ExperimentResult::find(BalanceMode mode) const {
  for (const auto& r : runs) {
    if (r.mode == mode) return &r;
  }
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Scenario& scenario) {
  ExperimentResult result;
  result.load_assignment = scenario.load_assignment;
  for (auto mode : config.modes) result.runs.push_back(run_mode(scenario, config, mode));
  if (const ModeRun* unaware = result.find(BalanceMode::kTopologyUnaware); unaware && unaware->ltc > 0.0) {
    const double without = unaware->ltc;
    for (auto& r : result.runs) r.benefit = benefit(r.ltc, without);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, build_scenario(config));
}

namespace {

void prepare_dir(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw std::runtime_error(fmt::format("output path '{}' is not a directory", dir.string()));
    if (!fs::is_empty(dir) && !overwrite) {
      throw std::runtime_error(
          fmt::format("output directory '{}' exists and is not empty (use --overwrite)", dir.string()));
    }
  }
  fs::create_directories(dir);
}

std::string format_benefit(const std::optional<double>& b) { return b ? fmt::format("{}", *b) : "nan"; }

void write_mode(const ModeRun& run, int rounds, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = fmt::output_file((dir / "transfers.csv").string());
    out.print("round,src,dst,load,distance\n");
    for (const auto& t : run.transfers) out.print("{},{},{},{},{}\n", t.round, t.source, t.destination, t.load, t.distance);
  }
  {
    auto out = fmt::output_file((dir / "nodes.csv").string());
    out.print("node,capacity,load_before,load_after,in_degree\n");
    for (std::size_t i = 0; i < run.before.size(); ++i) {
      out.print("{},{},{},{},{}\n", i, run.before[i].capacity, run.before[i].load, run.after[i].load,
                run.in_degree[i]);
    }
  }
  {
    auto out = fmt::output_file((dir / "cdf.csv").string());
    out.print("latency,cum_fraction\n");
    if (!run.transfers.empty()) {
      for (const auto& p : transferred_load_cdf(run.transfers)) out.print("{},{}\n", p.latency, p.cum_fraction);
    }
  }
  {
    auto out = fmt::output_file((dir / "summary.csv").string());
    out.print("ltc,benefit,max_util,rounds\n");
    out.print("{},{},{},{}\n", run.ltc, format_benefit(run.benefit), run.summary_after.max_utilization, rounds);
  }
}

}  // namespace

void write_outputs(const ExperimentResult& result, const ExperimentConfig& config, const fs::path& dir,
                   bool overwrite) {
  prepare_dir(dir, overwrite);
  for (const auto& run : result.runs) write_mode(run, config.rounds, dir / std::string(to_string(run.mode)));
}

SweepParam parse_sweep_param(std::string_view name) {
  if (name == "ttl") return SweepParam::kTtl;
  if (name == "desired_val") return SweepParam::kDesiredVal;
  if (name == "qlb") return SweepParam::kQlb;
  if (name == "numVS" || name == "num_vs") return SweepParam::kNumVs;
  throw std::invalid_argument(fmt::format("unknown sweep parameter '{}' (expected ttl, desired_val, qlb, numVS)", name));
}

std::string_view to_string(SweepParam param) {
  switch (param) {
    case SweepParam::kTtl: return "ttl";
    case SweepParam::kDesiredVal: return "desired_val";
    case SweepParam::kQlb: return "qlb";
    case SweepParam::kNumVs: return "numVS";
  }
  return "?";
}

std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepParam param,
                              const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: no values given");
  static constexpr std::string_view kKeys[] = {"lb.ttl", "lb.desired_val", "lb.qlb", "lb.num_vs"};
  const std::string_view key = kKeys[static_cast<int>(param)];

  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    ExperimentConfig c = config;
    apply_setting(c, key, v);
    c.validate();
    configs.push_back(std::move(c));
  }
  std::vector<SweepPoint> points;
  std::optional<Scenario> shared;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (param == SweepParam::kNumVs) {
      points.push_back({values[i], run_experiment(configs[i])});
    } else {
      if (!shared) shared = build_scenario(configs[i]);
      points.push_back({values[i], run_experiment(configs[i], *shared)});
    }
  }
  return points;
}

void write_sweep_outputs(const std::vector<SweepPoint>& points, const ExperimentConfig& config, SweepParam param,
                         const fs::path& dir, bool overwrite) {
  prepare_dir(dir, overwrite);
  auto merged = fmt::output_file((dir / "sweep.csv").string());
  merged.print("param,value,mode,ltc,benefit,max_util,p99_util,heavy_nodes,rounds\n");
  for (const auto& p : points) {
    const fs::path sub = dir / fmt::format("{}-{}", to_string(param), p.value);
    for (const auto& run : p.result.runs) {
      write_mode(run, config.rounds, sub / std::string(to_string(run.mode)));
      merged.print("{},{},{},{},{},{},{},{},{}\n", to_string(param), p.value, to_string(run.mode), run.ltc,
                   format_benefit(run.benefit), run.summary_after.max_utilization,
                   run.summary_after.p99_utilization, run.heavy_after, config.rounds);
    }
  }
}

}  // namespace raqlb
