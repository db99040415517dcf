// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Runs the 1024-node reference scenario over five seeds.

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "raqlb/experiment.h"
#include "raqlb/random.h"

using namespace raqlb;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, std::string_view name, bool ok, const std::string& detail) {
  fmt::print("[{}] {:>2} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
  if (!ok) ++failures;
}

constexpr int kSeeds = 5;
constexpr std::size_t kReferenceNodes = 1024;

ExperimentConfig reference_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.nodes = kReferenceNodes;
  c.rounds = 10;
  c.seed = seed;
  c.modes = {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware};
  return c;
}

struct SeedRuns {
  ModeRun aware;
  ModeRun unaware;
  ModeRun ttl1;
  ModeRun ttl4;
};

// Every transfer was admitted with the receiver strictly below its target.
std::size_t infeasible_transfers(const ModeRun& run) {
  std::size_t bad = 0;
  for (const auto& t : run.transfers) {
    if (!(t.receiver_load_after < t.receiver_target)) ++bad;
  }
  return bad;
}

std::size_t nlis_violations(const ModeRun& run) {
  std::size_t v = 0;
  for (const auto& r : run.rounds) v += r.bound_violations;
  return v;
}

std::string join(const std::vector<double>& xs, int precision = 3) {
  std::string s;
  for (double x : xs) s += fmt::format("{}{:.{}f}", s.empty() ? "" : " ", x, precision);
  return s;
}

// Literal replay of the Find-LightNode comparison chain.
std::optional<HostId> replay_find_light_node(double candidate_load, const NLIS& nlis, double neighutil, double qlb) {
  bool have = false;
  HostId can_node = 0;
  double dist_can = 0.0;
  double u_can = 0.0;
  for (const auto& j : nlis.entries) {
    double t_j = neighutil * j.capacity;
    if (j.load + candidate_load < t_j) {
      double u_j = j.load / j.capacity;
      if (!have) {
        have = true;
        can_node = j.node;
        dist_can = j.distance_to_origin;
        u_can = u_j;
      } else if (std::abs(j.distance_to_origin - dist_can) <= qlb) {
        if (u_j < u_can) {
          can_node = j.node;
          dist_can = j.distance_to_origin;
          u_can = u_j;
        }
      } else if (j.distance_to_origin < dist_can) {
        can_node = j.node;
        dist_can = j.distance_to_origin;
        u_can = u_j;
      }
    }
  }
  if (!have) return std::nullopt;
  return can_node;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::pair<bool, std::string> contention_check() {
  // Hosts 0 and 1 are heavy and see host 2 as their only light node; the
  // stale NLIS of host 1 would overfill host 2 without the gate.
  std::vector<NetworkCoordinate> coords{{{0.0, 0.0}}, {{10.0, 0.0}}, {{0.0, 10.0}}};
  auto oracle = DistanceOracle::from_coordinates(coords);
  Overlay overlay(Box::unit(2));
  overlay.add_node(1.0);
  overlay.add_node(1.0);
  overlay.add_node(10.0);
  overlay.join_at(0, std::vector<double>{0.1, 0.1});
  overlay.join_at(1, std::vector<double>{0.9, 0.1});
  overlay.join_at(2, std::vector<double>{0.1, 0.9});
  overlay.join_at(0, std::vector<double>{0.9, 0.9});
  overlay.join_at(1, std::vector<double>{0.4, 0.6});
  overlay.join_at(2, std::vector<double>{0.6, 0.4});
  overlay.build_routing_tables({FillMode::kTopologyAware, &oracle, 1});
  for (VsId v : overlay.live_vs()) overlay.set_load(v, overlay.vs(v).host == 2 ? 0.25 : 4.0);

  LBParams params;
  params.num_vs = 2;
  params.ttl = 2;
  params.desired_val = 1000.0;
  auto round = run_balancing_round(overlay, params, oracle, BalanceMode::kTopologyAware, 1, 7);

  // Naive landing: every transfer a heavy node would attempt against its
  // round-start view of host 2.
  std::size_t into_light = 0, admitted_bad = 0;
  for (const auto& t : round.transfers) {
    if (t.destination == 2) ++into_light;
    if (!(t.receiver_load_after < t.receiver_target)) ++admitted_bad;
  }
  const double final_light = overlay.node_load(2);
  const double light_target = round.transfers.empty() ? 0.0 : round.transfers.back().receiver_target;
  const bool ok = round.heavy_nodes >= 2 && round.rejections >= 1 && admitted_bad == 0 && into_light >= 1 &&
                  final_light < light_target && overlay.audit().empty();

  // Direct gate check: two synchs computed from the same stale view.
  SynchGate gate(3, 0);
  auto first = gate.request(2, 0.5, 8.0, 13.75);
  auto second = gate.request(2, 8.5, 8.0, 13.75);
  const bool gate_ok = first == SynchGate::Reply::kAck && second == SynchGate::Reply::kReject && gate.acks(2) == 1;

  return {ok && gate_ok,
          fmt::format("heavy={} landed_on_light={} rejected={} light_load={:.3g} < T={:.3g}; gate acks={}",
                     round.heavy_nodes, into_light, round.rejections, final_light, light_target, gate.acks(2))};
}

void criterion_find_light_node() {
  Rng rng(20240601);
  std::size_t matches = 0, found = 0;
  const std::size_t trials = 10000;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    NLIS nlis;
    const auto size = rng.below(13);
    std::vector<HostId> ids;
    for (HostId h = 1; h <= 40; ++h) ids.push_back(h);
    rng.shuffle(ids.begin(), ids.end());
    ids.resize(size);
    std::sort(ids.begin(), ids.end());
    for (HostId h : ids) {
      LoadInfoEntry e;
      e.node = h;
      e.capacity = std::array{1.0, 10.0, 100.0}[rng.below(3)];
      e.load = rng.uniform(0.0, 1.5) * e.capacity;
      // Coarse distances produce ties and exact QLB-boundary gaps.
      e.distance_to_origin = 10.0 * static_cast<double>(rng.below(40));
      nlis.entries.push_back(e);
    }
    const double neighutil = rng.uniform(0.2, 1.2);
    const double candidate = rng.uniform(0.0, 30.0);
    const double qlb = 10.0 * static_cast<double>(rng.below(20));
    auto got = find_light_node(candidate, nlis, neighutil, qlb);
    auto want = replay_find_light_node(candidate, nlis, neighutil, qlb);
    if (got == want) ++matches;
    if (want) ++found;
  }
  report(6, "find-light-node replay", matches == trials,
         fmt::format("{}/{} selections identical ({} with a receiver)", matches, trials, found));
}

void criterion_routing() {
  Overlay overlay(Box::unit(2));
  Rng rng(4096);
  for (HostId h = 0; h < 512; ++h) overlay.add_node(1.0);
  for (HostId h = 0; h < 512; ++h) overlay.join_node(h, 8, rng);
  overlay.build_routing_tables({FillMode::kTopologyUnaware, nullptr, 11});
  const auto live = overlay.live_vs();
  std::size_t correct = 0, hops = 0;
  const std::size_t trials = 10000;
  std::vector<double> target(2);
  for (std::size_t i = 0; i < trials; ++i) {
    VsId origin = live[rng.below(live.size())];
    target = {rng.uniform01(), rng.uniform01()};
    auto path = overlay.route_query(origin, target);
    VsId brute = kNoVs;
    for (VsId v : live) {
      if (overlay.region(v).contains(target)) brute = v;
    }
    if (path.back() == brute) ++correct;
    hops += path.size() - 1;
  }
  const double mean_hops = static_cast<double>(hops) / static_cast<double>(trials);
  const double bound = 2.0 * std::log2(static_cast<double>(overlay.vs_count()));
  report(7, "routing", correct == trials && mean_hops <= bound,
         fmt::format("{}/{} routes reach the owning server over {} servers; mean hops {:.2f} <= {:.1f}", correct,
                     trials, overlay.vs_count(), mean_hops, bound));
}

void criterion_conservation() {
  Rng rng(8888);
  std::vector<NetworkCoordinate> coords;
  for (int i = 0; i < 32; ++i) coords.push_back({{rng.uniform(0, 100), rng.uniform(0, 100)}});
  auto oracle = DistanceOracle::from_coordinates(coords);
  Overlay overlay(Box::unit(3));
  for (HostId h = 0; h < 32; ++h) overlay.add_node(static_cast<double>(1 + rng.below(100)));
  for (HostId h = 0; h < 32; ++h) overlay.join_node(h, 4, rng);
  overlay.build_routing_tables({FillMode::kTopologyAware, &oracle, 3});
  for (VsId v : overlay.live_vs()) overlay.set_load(v, rng.uniform(0.0, 10.0));
  const double expected_load = overlay.total_load();

  double worst_load = 0.0, worst_fraction = 0.0;
  std::size_t audit_failures = 0;
  std::map<std::string, int> ops;
  std::vector<double> point(3);
  for (int op = 0; op < 10000; ++op) {
    const auto live = overlay.live_vs();
    const auto kind = rng.below(10);
    if (kind < 3 || live.size() < 8) {
      for (auto& x : point) x = rng.uniform01();
      const VsId occupant = overlay.locate(point);
      if (overlay.vs(occupant).point != point) {
        overlay.join_at(static_cast<HostId>(rng.below(32)), point);
        ++ops["join"];
      }
    } else if (kind < 6) {
      overlay.depart_virtual_server(live[rng.below(live.size())]);
      ++ops["depart"];
    } else if (kind < 9) {
      const VsId v = live[rng.below(live.size())];
      const HostId from = overlay.vs(v).host;
      HostId to = static_cast<HostId>(rng.below(31));
      if (to >= from) ++to;
      overlay.transfer_virtual_server(v, from, to, oracle);
      ++ops["transfer"];
    } else {
      overlay.handle_heavy_load(static_cast<HostId>(rng.below(32)));
      ++ops["heavy"];
    }
    worst_load = std::max(worst_load, std::abs(overlay.total_load() - expected_load));
    worst_fraction = std::max(worst_fraction, std::abs(overlay.total_fraction() - 1.0));
    if (op % 250 == 249 && !overlay.audit().empty()) ++audit_failures;
  }
  report(8, "conservation", worst_load <= 1e-9 && worst_fraction <= 1e-9 && audit_failures == 0,
         fmt::format("10000 ops (join {} depart {} transfer {} heavy {}); max |dload|={:.2e} max |dfraction|={:.2e}; "
                     "failed audits {}",
                     ops["join"], ops["depart"], ops["transfer"], ops["heavy"], worst_load, worst_fraction,
                     audit_failures));
}

void criterion_in_degree() {
  ExperimentConfig c;
  c.nodes = 1000;
  c.seed = 10;
  auto scenario = build_scenario(c);
  Overlay aware = *scenario.overlay;
  Overlay unaware = *scenario.overlay;
  unaware.build_routing_tables({FillMode::kTopologyUnaware, nullptr, 10});
  const auto ha = in_degree_histogram(aware);
  const auto hu = in_degree_histogram(unaware);

  std::vector<HostId> order(aware.node_count());
  for (HostId h = 0; h < order.size(); ++h) order[h] = h;
  std::stable_sort(order.begin(), order.end(),
                   [&](HostId a, HostId b) { return aware.node(a).in_degree > aware.node(b).in_degree; });
  order.resize(order.size() / 10);
  auto top_max = [&] {
    std::size_t m = 0;
    for (HostId h : order) m = std::max(m, aware.node(h).in_degree);
    return m;
  };
  const std::size_t before = top_max();
  for (HostId h : order) aware.handle_heavy_load(h);
  const std::size_t after = top_max();
  const bool counts_ok = aware.recount_in_degrees() == [&] {
    std::vector<std::size_t> v;
    for (HostId h = 0; h < aware.node_count(); ++h) v.push_back(aware.node(h).in_degree);
    return v;
  }();
  report(10, "in-degree", ha.variance > hu.variance && after < before && counts_ok,
         fmt::format("variance aware {:.1f} > unaware {:.1f}; top-decile max in-degree {} -> {}", ha.variance,
                     hu.variance, before, after));
}

void criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "raqlb_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig c = reference_config(1);
  c.modes = {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware, BalanceMode::kDirectory};
  c.rounds = 4;
  for (const char* run : {"a", "b"}) write_outputs(run_experiment(c), c, root / run, false);
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    auto other = root / "b" / fs::relative(entry.path(), root / "a");
    if (fs::exists(other) && read_file(entry.path()) == read_file(other)) ++identical;
  }
  fs::remove_all(root);
  report(11, "determinism", files == 12 && identical == files,
         fmt::format("{}/{} CSV files byte-identical across repeated runs", identical, files));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();

  std::vector<SeedRuns> runs;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    const ExperimentConfig c = reference_config(static_cast<std::uint64_t>(seed));
    const Scenario scenario = build_scenario(c);
    SeedRuns r;
    r.aware = run_mode(scenario, c, BalanceMode::kTopologyAware);
    r.unaware = run_mode(scenario, c, BalanceMode::kTopologyUnaware);
    ExperimentConfig c1 = c;
    c1.lb.ttl = 1;
    r.ttl1 = run_mode(scenario, c1, BalanceMode::kTopologyAware);
    ExperimentConfig c4 = c;
    c4.lb.ttl = 4;
    r.ttl4 = run_mode(scenario, c4, BalanceMode::kTopologyAware);
    runs.push_back(std::move(r));
  }

  {
    std::vector<double> b;
    for (const auto& r : runs) b.push_back(benefit(r.aware.ltc, r.unaware.ltc));
    double mean = 0.0;
    for (double x : b) mean += x;
    mean /= static_cast<double>(b.size());
    report(1, "benefit", mean >= 0.25, fmt::format("mean {:.3f} >= 0.25 (per seed {})", mean, join(b)));
  }
  {
    int ok = 0;
    std::vector<double> ratio;
    for (const auto& r : runs) {
      const double a = weighted_median_distance(r.aware.transfers);
      const double u = weighted_median_distance(r.unaware.transfers);
      ratio.push_back(a / u);
      if (a <= 0.6 * u) ++ok;
    }
    report(2, "transfer-latency CDF", ok >= 4,
           fmt::format("aware/unaware weighted median ratio <= 0.6 on {}/5 seeds ({})", ok, join(ratio)));
  }
  {
    int better = 0, not_improved = 0;
    std::vector<double> u1, u2, u4;
    for (const auto& r : runs) {
      u1.push_back(r.ttl1.summary_after.max_utilization);
      u2.push_back(r.aware.summary_after.max_utilization);
      u4.push_back(r.ttl4.summary_after.max_utilization);
      if (u2.back() <= u1.back()) ++better;
      if (u4.back() >= u2.back()) ++not_improved;
    }
    report(3, "TTL effect", better >= 4 && not_improved >= 4,
           fmt::format("max util TTL2 <= TTL1 on {}/5, TTL4 >= TTL2 on {}/5 (TTL1 {} | TTL2 {} | TTL4 {})", better,
                       not_improved, join(u1), join(u2), join(u4)));
  }
  {
    std::size_t violations = 0, probes = 0, largest = 0;
    for (const auto& r : runs) {
      for (const ModeRun* m : {&r.aware, &r.unaware, &r.ttl1, &r.ttl4}) {
        violations += nlis_violations(*m);
        for (const auto& round : m->rounds) largest = std::max(largest, round.max_nlis);
        probes += m->rounds.size() * kReferenceNodes;
      }
    }
    const std::size_t b42 = nlis_member_bound(4, 2);
    report(4, "NLIS bound", violations == 0 && b42 == 20,
           fmt::format("{} violations over {} probes (largest NLIS {}); bound(numVS=4, TTL=2) = {}", violations,
                       probes, largest, b42));
  }
  {
    std::size_t bad = 0, total = 0;
    for (const auto& r : runs) {
      for (const ModeRun* m : {&r.aware, &r.unaware, &r.ttl1, &r.ttl4}) {
        bad += infeasible_transfers(*m);
        total += m->transfers.size();
      }
    }
    auto [contention_ok, contention] = contention_check();
    report(5, "feasibility and synch", bad == 0 && contention_ok,
           fmt::format("{} of {} accepted transfers left the receiver at or above its target; contention: {}", bad,
                       total, contention));
  }
  criterion_find_light_node();
  criterion_routing();
  criterion_conservation();
  {
    int ok = 0;
    std::vector<double> pre, post;
    for (const auto& r : runs) {
      pre.push_back(r.aware.summary_before.correlation);
      post.push_back(r.aware.summary_after.correlation);
      if (post.back() > pre.back()) ++ok;
    }
    report(9, "load/capacity correlation", ok == kSeeds,
           fmt::format("post > pre on {}/5 seeds (pre {} | post {})", ok, join(pre), join(post)));
  }
  criterion_in_degree();
  criterion_determinism();

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fmt::print("{} criterion check(s) failed; {:.0f}s\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
