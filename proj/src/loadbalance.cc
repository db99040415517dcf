#include "raqlb/loadbalance.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "raqlb/random.h"

namespace raqlb {

namespace {

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

int resolve_num_vs(const LBParams& params, std::size_t nodes) {
  return params.num_vs > 0 ? params.num_vs : default_num_vs(nodes);
}

std::vector<double> current_loads(const Overlay& overlay) {
  std::vector<double> loads(overlay.node_count());
  for (HostId h = 0; h < loads.size(); ++h) loads[h] = overlay.node_load(h);
  return loads;
}

double max_utilization(const Overlay& overlay) {
  double m = 0.0;
  for (HostId h = 0; h < overlay.node_count(); ++h) m = std::max(m, overlay.utilization(h));
  return m;
}

}  // namespace

void LBParams::validate() const {
  if (ttl < 1) throw std::invalid_argument("lb: ttl must be >= 1");
  if (!(desired_val > 0.0)) throw std::invalid_argument("lb: desired_val must be positive");
  if (!(qlb >= 0.0)) throw std::invalid_argument("lb: qlb must be non-negative");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("lb: epsilon must be non-negative");
  if (num_vs < 0) throw std::invalid_argument("lb: num_vs must be >= 0 (0 selects ceil(log2 N))");
  if (max_transfers_per_round < 0) throw std::invalid_argument("lb: max_transfers_per_round must be >= 0");
  if (retry_budget < 1) throw std::invalid_argument("lb: retry_budget must be >= 1");
  if (synch_budget < 0) throw std::invalid_argument("lb: synch_budget must be >= 0");
}

int default_num_vs(std::size_t nodes) {
  int k = 0;
  while ((std::size_t{1} << k) < nodes) ++k;
  return std::max(k, 1);
}

BalanceMode parse_balance_mode(std::string_view name) {
  if (name == "aware") return BalanceMode::kTopologyAware;
  if (name == "unaware") return BalanceMode::kTopologyUnaware;
  if (name == "directory") return BalanceMode::kDirectory;
  throw std::invalid_argument(fmt::format("unknown balancing mode '{}'", name));
}

std::string_view to_string(BalanceMode mode) {
  switch (mode) {
    case BalanceMode::kTopologyAware: return "aware";
    case BalanceMode::kTopologyUnaware: return "unaware";
    case BalanceMode::kDirectory: return "directory";
  }
  return "?";
}

std::size_t nlis_member_bound(int num_vs, int ttl) {
  if (num_vs < 1 || ttl < 0) throw std::invalid_argument("nlis bound: num_vs >= 1 and ttl >= 0 required");
  std::size_t total = 0;
  std::size_t term = 1;
  for (int j = 1; j <= ttl; ++j) {
    term *= static_cast<std::size_t>(num_vs);
    total += term;
  }
  return total;
}

ProbeSettings probe_settings(const LBParams& params, BalanceMode mode, int num_vs, std::uint64_t seed) {
  ProbeSettings s;
  s.ttl = params.ttl;
  s.fan_out = static_cast<std::size_t>(num_vs);
  s.seed = seed;
  if (mode == BalanceMode::kTopologyAware) {
    s.desired_val = params.desired_val;
    s.nearest_first = true;
  } else {
    s.desired_val = kUnbounded;
    s.nearest_first = false;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Probe-load

NLIS probe_load(const Overlay& overlay, HostId origin, const ProbeSettings& settings, const DistanceOracle& oracle,
                std::span<const double> loads) {
  if (origin >= overlay.node_count()) throw std::out_of_range("probe: unknown origin");
  const std::size_t n = overlay.node_count();
  NLIS nlis;
  nlis.origin = origin;
  if (settings.ttl < 1) return nlis;

  // Distinct link targets of `from` lying within desired_val of the origin,
  // in forwarding order and capped at the fan-out.
  std::vector<HostId> targets;
  std::vector<char> seen_target(n, 0);
  auto forward_targets = [&](HostId from) {
    targets.clear();
    for (VsId v : overlay.node(from).virtual_servers) {
      for (const auto& e : overlay.vs(v).routing.rows) {
        if (e.target == kNoVs) continue;
        HostId h = overlay.vs(e.target).host;
        if (h == from || h == origin || seen_target[h]) continue;
        if (!(oracle.distance(origin, h) < settings.desired_val)) continue;
        seen_target[h] = 1;
        targets.push_back(h);
      }
    }
    for (HostId h : targets) seen_target[h] = 0;
    if (settings.nearest_first) {
      std::sort(targets.begin(), targets.end(), [&](HostId a, HostId b) {
        double da = oracle.distance(origin, a), db = oracle.distance(origin, b);
        return da != db ? da < db : a < b;
      });
    } else {
      std::sort(targets.begin(), targets.end());
      Rng rng(derive_seed(settings.seed, origin, from));
      rng.shuffle(targets.begin(), targets.end());
    }
    if (settings.fan_out > 0 && targets.size() > settings.fan_out) targets.resize(settings.fan_out);
  };

  // Breadth-first delivery; a node handles only the first copy of the probe,
  // which under BFS is also the copy with the most TTL left.
  std::vector<char> handled(n, 0);
  handled[origin] = 1;
  std::deque<std::pair<HostId, int>> messages;
  forward_targets(origin);
  for (HostId h : targets) messages.emplace_back(h, settings.ttl);
  while (!messages.empty()) {
    auto [node, ttl] = messages.front();
    messages.pop_front();
    if (handled[node]) continue;
    handled[node] = 1;
    LoadInfoEntry entry;
    entry.node = node;
    entry.load = loads.empty() ? overlay.node_load(node) : loads[node];
    entry.capacity = overlay.node(node).capacity;
    if (oracle.has_coordinates()) entry.coordinate = oracle.coordinate(node);
    entry.distance_to_origin = oracle.distance(origin, node);
    nlis.entries.push_back(std::move(entry));
    if (ttl - 1 > 0) {
      forward_targets(node);
      for (HostId h : targets) {
        if (!handled[h]) messages.emplace_back(h, ttl - 1);
      }
    }
  }
  std::sort(nlis.entries.begin(), nlis.entries.end(),
            [](const LoadInfoEntry& a, const LoadInfoEntry& b) { return a.node < b.node; });
  return nlis;
}

// ---------------------------------------------------------------------------
// Categorization and selection

double neighborhood_utilization(double origin_load, double origin_capacity, const NLIS& nlis) {
  double load = origin_load;
  double capacity = origin_capacity;
  for (const auto& e : nlis.entries) {
    load += e.load;
    capacity += e.capacity;
  }
  return capacity > 0.0 ? load / capacity : 0.0;
}

NodeCategory categorize(double load, double capacity, double neighutil, double epsilon) {
  return load > target_load(neighutil, epsilon, capacity) ? NodeCategory::kHeavy : NodeCategory::kLight;
}

std::size_t choose_candidate_index(std::span<const double> vs_loads, double node_load, double target) {
  if (vs_loads.empty()) throw std::invalid_argument("choose candidate: node hosts no virtual servers");
  std::optional<std::size_t> lightest_sufficient;
  std::size_t heaviest = 0;
  for (std::size_t i = 0; i < vs_loads.size(); ++i) {
    if (vs_loads[i] > vs_loads[heaviest]) heaviest = i;
    if (node_load - vs_loads[i] <= target &&
        (!lightest_sufficient || vs_loads[i] < vs_loads[*lightest_sufficient])) {
      lightest_sufficient = i;
    }
  }
  return lightest_sufficient.value_or(heaviest);
}

VsId choose_candidate_vs(const Overlay& overlay, HostId host, double target) {
  const auto& hosted = overlay.node(host).virtual_servers;
  std::vector<double> loads;
  loads.reserve(hosted.size());
  for (VsId v : hosted) loads.push_back(overlay.vs(v).load);
  return hosted[choose_candidate_index(loads, overlay.node_load(host), target)];
}

std::optional<HostId> find_light_node(double candidate_load, const NLIS& nlis, double neighutil, double qlb,
                                      std::span<const HostId> excluded) {
  const LoadInfoEntry* best = nullptr;
  for (const auto& j : nlis.entries) {
    if (std::find(excluded.begin(), excluded.end(), j.node) != excluded.end()) continue;
    const double target_j = neighutil * j.capacity;
    if (!(j.load + candidate_load < target_j)) continue;
    if (best == nullptr) {
      best = &j;
    } else if (std::abs(j.distance_to_origin - best->distance_to_origin) <= qlb) {
      // Comparable distance: prefer load-balance quality.
      if (j.utilization() < best->utilization()) best = &j;
    } else if (j.distance_to_origin < best->distance_to_origin) {
      // Distances differ by more than qlb: prefer the closer node.
      best = &j;
    }
  }
  if (best == nullptr) return std::nullopt;
  return best->node;
}

// ---------------------------------------------------------------------------
// Synchronization

SynchGate::SynchGate(std::size_t nodes, int budget) : budget_(budget), requests_(nodes, 0), acks_(nodes, 0) {}

SynchGate::Reply SynchGate::request(HostId receiver, double current_load, double incoming_load, double target) {
  auto& count = requests_.at(receiver);
  if (budget_ > 0 && count >= static_cast<std::size_t>(budget_)) {
    ++count;
    return Reply::kTimeout;
  }
  ++count;
  if (current_load + incoming_load < target) {
    ++acks_[receiver];
    return Reply::kAck;
  }
  return Reply::kReject;
}

std::optional<TransferRecord> synchronize_and_transfer(Overlay& overlay, HostId heavy, HostId light, VsId vs,
                                                       double light_target, SynchGate& gate,
                                                       const DistanceOracle& oracle, int round,
                                                       SynchGate::Reply* reply) {
  const double load = overlay.vs(vs).load;
  auto r = gate.request(light, overlay.node_load(light), load, light_target);
  if (reply) *reply = r;
  if (r != SynchGate::Reply::kAck) return std::nullopt;
  TransferRecord record = overlay.transfer_virtual_server(vs, heavy, light, oracle);
  record.round = round;
  record.receiver_load_after = overlay.node_load(light);
  record.receiver_target = light_target;
  return record;
}

// ---------------------------------------------------------------------------
// Rounds

RoundReport run_balancing_round(Overlay& overlay, const LBParams& params, const DistanceOracle& oracle,
                                BalanceMode mode, int round, std::uint64_t seed) {
  params.validate();
  if (mode == BalanceMode::kDirectory) return run_directory_round(overlay, params, oracle, round);

  const std::size_t n = overlay.node_count();
  const int num_vs = resolve_num_vs(params, n);
  const auto settings = probe_settings(params, mode, num_vs, derive_seed(seed, static_cast<std::uint64_t>(round)));
  const double qlb = mode == BalanceMode::kTopologyAware ? params.qlb : kUnbounded;
  const std::size_t max_transfers =
      static_cast<std::size_t>(params.max_transfers_per_round > 0 ? params.max_transfers_per_round : num_vs);

  RoundReport report;
  report.round = round;
  report.nlis_bound = nlis_member_bound(num_vs, params.ttl);
  report.max_util_before = max_utilization(overlay);

  // Step 1: every node probes against round-start loads.
  const auto loads = current_loads(overlay);
  std::vector<NLIS> nlis(n);
  std::vector<double> neighutil(n), target(n);
  std::vector<HostId> heavy;
  for (HostId h = 0; h < n; ++h) {
    nlis[h] = probe_load(overlay, h, settings, oracle, loads);
    report.max_nlis = std::max(report.max_nlis, nlis[h].entries.size());
    if (nlis[h].entries.size() > report.nlis_bound) ++report.bound_violations;
    // Step 2: categorize.
    const double cap = overlay.node(h).capacity;
    neighutil[h] = neighborhood_utilization(loads[h], cap, nlis[h]);
    target[h] = target_load(neighutil[h], params.epsilon, cap);
    if (categorize(loads[h], cap, neighutil[h], params.epsilon) == NodeCategory::kHeavy) heavy.push_back(h);
  }
  report.heavy_nodes = heavy.size();

  // Step 3: heavy nodes reassign, ascending id, arbitrated by the gate.
  SynchGate gate(n, params.synch_budget);
  for (HostId h : heavy) {
    NLIS& view = nlis[h];
    std::vector<HostId> excluded;
    std::size_t moved = 0;
    while (moved < max_transfers && !overlay.node(h).virtual_servers.empty() &&
           overlay.node_load(h) > target[h]) {
      const VsId vs = choose_candidate_vs(overlay, h, target[h]);
      const double vs_load = overlay.vs(vs).load;
      bool placed = false;
      for (int attempt = 0; attempt < params.retry_budget; ++attempt) {
        auto light = find_light_node(vs_load, view, neighutil[h], qlb, excluded);
        if (!light) break;
        SynchGate::Reply reply;
        auto record = synchronize_and_transfer(overlay, h, *light, vs, neighutil[h] * overlay.node(*light).capacity,
                                               gate, oracle, round, &reply);
        if (record) {
          // The heavy node knows what it just sent.
          for (auto& e : view.entries) {
            if (e.node == *light) e.load += vs_load;
          }
          report.transfers.push_back(*record);
          placed = true;
          ++moved;
          break;
        }
        (reply == SynchGate::Reply::kTimeout ? report.timeouts : report.rejections) += 1;
        excluded.push_back(*light);
      }
      if (!placed) break;
    }
  }
  report.max_util_after = max_utilization(overlay);
  return report;
}

RoundReport run_directory_round(Overlay& overlay, const LBParams& params, const DistanceOracle& oracle, int round) {
  params.validate();
  const std::size_t n = overlay.node_count();
  const int num_vs = resolve_num_vs(params, n);
  const std::size_t max_transfers =
      static_cast<std::size_t>(params.max_transfers_per_round > 0 ? params.max_transfers_per_round : num_vs);

  RoundReport report;
  report.round = round;
  report.max_util_before = max_utilization(overlay);

  auto loads = current_loads(overlay);
  double total_load = 0.0, total_cap = 0.0;
  for (HostId h = 0; h < n; ++h) {
    total_load += loads[h];
    total_cap += overlay.node(h).capacity;
  }
  const double global = total_cap > 0.0 ? total_load / total_cap : 0.0;

  std::vector<HostId> heavy;
  for (HostId h = 0; h < n; ++h) {
    if (categorize(loads[h], overlay.node(h).capacity, global, params.epsilon) == NodeCategory::kHeavy) {
      heavy.push_back(h);
    }
  }
  // Most utilized first.
  std::sort(heavy.begin(), heavy.end(), [&](HostId a, HostId b) {
    double ua = loads[a] / overlay.node(a).capacity, ub = loads[b] / overlay.node(b).capacity;
    return ua != ub ? ua > ub : a < b;
  });
  report.heavy_nodes = heavy.size();

  for (HostId h : heavy) {
    const double target = target_load(global, params.epsilon, overlay.node(h).capacity);
    std::size_t moved = 0;
    while (moved < max_transfers && overlay.node_load(h) > target) {
      // Heaviest virtual server that some node can take; the receiver is
      // the least-utilized feasible node.
      std::vector<VsId> hosted = overlay.node(h).virtual_servers;
      std::stable_sort(hosted.begin(), hosted.end(),
                       [&](VsId a, VsId b) { return overlay.vs(a).load > overlay.vs(b).load; });
      std::optional<std::pair<VsId, HostId>> choice;
      for (VsId v : hosted) {
        const double vl = overlay.vs(v).load;
        if (vl <= 0.0) break;
        std::optional<HostId> best;
        for (HostId j = 0; j < n; ++j) {
          if (j == h || !(loads[j] + vl < global * overlay.node(j).capacity)) continue;
          if (!best || loads[j] / overlay.node(j).capacity < loads[*best] / overlay.node(*best).capacity) best = j;
        }
        if (best) {
          choice = std::make_pair(v, *best);
          break;
        }
      }
      if (!choice) break;
      auto [v, j] = *choice;
      const double vl = overlay.vs(v).load;
      TransferRecord record = overlay.transfer_virtual_server(v, h, j, oracle);
      record.round = round;
      record.receiver_target = global * overlay.node(j).capacity;
      loads[h] -= vl;
      loads[j] += vl;
      record.receiver_load_after = overlay.node_load(j);
      report.transfers.push_back(record);
      ++moved;
    }
  }
  report.max_util_after = max_utilization(overlay);
  return report;
}

std::size_t count_heavy_nodes(const Overlay& overlay, const LBParams& params, const DistanceOracle& oracle,
                              BalanceMode mode, std::uint64_t seed) {
  const std::size_t n = overlay.node_count();
  const auto loads = current_loads(overlay);
  std::size_t heavy = 0;
  if (mode == BalanceMode::kDirectory) {
    double total_load = 0.0, total_cap = 0.0;
    for (HostId h = 0; h < n; ++h) {
      total_load += loads[h];
      total_cap += overlay.node(h).capacity;
    }
    const double global = total_cap > 0.0 ? total_load / total_cap : 0.0;
    for (HostId h = 0; h < n; ++h) {
      if (categorize(loads[h], overlay.node(h).capacity, global, params.epsilon) == NodeCategory::kHeavy) ++heavy;
    }
    return heavy;
  }
  const auto settings = probe_settings(params, mode, resolve_num_vs(params, n), seed);
  for (HostId h = 0; h < n; ++h) {
    const auto nlis = probe_load(overlay, h, settings, oracle, loads);
    const double cap = overlay.node(h).capacity;
    if (categorize(loads[h], cap, neighborhood_utilization(loads[h], cap, nlis), params.epsilon) ==
        NodeCategory::kHeavy) {
      ++heavy;
    }
  }
  return heavy;
}

}  // namespace raqlb
