#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raqlb/config.h"
#include "raqlb/metrics.h"

namespace raqlb {

// Everything shared by the paired runs of one experiment: hosts attached to
// the underlay, the distance oracle, and the joined overlay with loads.
struct Scenario {
  std::vector<UnderlayId> attachments;
  std::unique_ptr<DistanceOracle> oracle;  // heap-held: the overlay points at it
  std::unique_ptr<Overlay> overlay;
  LoadAssignment load_assignment;
};

Scenario build_scenario(const ExperimentConfig& config);

struct ModeRun {
  BalanceMode mode = BalanceMode::kTopologyAware;
  std::vector<RoundReport> rounds;
  std::vector<TransferRecord> transfers;
  std::vector<ScatterPoint> before;
  std::vector<ScatterPoint> after;
  std::vector<std::size_t> in_degree;  // per node, after balancing
  double ltc = 0.0;
  std::optional<double> benefit;  // against the unaware run, when present
  std::size_t heavy_after = 0;
  UtilizationSummary summary_before;
  UtilizationSummary summary_after;
};

// Balances a copy of the scenario's overlay for `config.rounds` rounds.
ModeRun run_mode(const Scenario& scenario, const ExperimentConfig& config, BalanceMode mode);

struct ExperimentResult {
  std::vector<ModeRun> runs;  // in config.modes order
  LoadAssignment load_assignment;

  const ModeRun* find(BalanceMode mode) const;
};

// Runs every configured mode on one shared scenario and fills in Benefit.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const Scenario& scenario);

// Writes <dir>/<mode>/{transfers,nodes,cdf,summary}.csv. Refuses an
// existing non-empty directory unless `overwrite`.
void write_outputs(const ExperimentResult& result, const ExperimentConfig& config,
                   const std::filesystem::path& dir, bool overwrite);

enum class SweepParam { kTtl, kDesiredVal, kQlb, kNumVs };

SweepParam parse_sweep_param(std::string_view name);
std::string_view to_string(SweepParam param);

struct SweepPoint {
  std::string value;
  ExperimentResult result;
};

// One experiment per value with everything else held fixed. The scenario is
// shared across points unless numVS changes it.
std::vector<SweepPoint> sweep(const ExperimentConfig& config, SweepParam param,
                              const std::vector<std::string>& values);

// Per-point outputs under <dir>/<param>-<value>/ plus <dir>/sweep.csv.
void write_sweep_outputs(const std::vector<SweepPoint>& points, const ExperimentConfig& config, SweepParam param,
                         const std::filesystem::path& dir, bool overwrite);

}  // namespace raqlb
