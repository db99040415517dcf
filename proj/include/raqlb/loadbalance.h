#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "raqlb/coordinates.h"
#include "raqlb/distance_oracle.h"
#include "raqlb/overlay.h"

namespace raqlb {

struct LBParams {
  int ttl = 2;
  double desired_val = 400.0;  // max probe/transfer distance, oracle units
  double qlb = 130.0;          // distance band inside which utilization wins
  double epsilon = 0.05;       // slack on the heavy/light threshold
  int num_vs = 0;              // virtual servers per node; 0 = ceil(log2 N)
  int max_transfers_per_round = 0;  // per heavy node; 0 = num_vs
  int retry_budget = 3;        // receivers tried per virtual server per round
  int synch_budget = 0;        // synchs a receiver answers per round; 0 = unlimited

  void validate() const;
};

// ceil(log2(nodes)), at least 1.
int default_num_vs(std::size_t nodes);

enum class BalanceMode : std::uint8_t { kTopologyAware, kTopologyUnaware, kDirectory };

BalanceMode parse_balance_mode(std::string_view name);
std::string_view to_string(BalanceMode mode);

struct LoadInfoEntry {
  HostId node = 0;
  double load = 0.0;
  double capacity = 1.0;
  NetworkCoordinate coordinate;
  double distance_to_origin = 0.0;

  double utilization() const { return load / capacity; }
};

// Neighborhood load information set, entries ascending by node id.
struct NLIS {
  HostId origin = 0;
  std::vector<LoadInfoEntry> entries;
};

// Worst-case member count sum_{j=1..ttl} num_vs^j.
std::size_t nlis_member_bound(int num_vs, int ttl);

struct ProbeSettings {
  int ttl = 2;
  double desired_val = 400.0;
  std::size_t fan_out = 0;    // distinct targets per forwarding node; 0 = all
  bool nearest_first = true;  // else a seeded topology-blind order
  std::uint64_t seed = 0;
};

ProbeSettings probe_settings(const LBParams& params, BalanceMode mode, int num_vs, std::uint64_t seed);

// Restricted flooding from `origin` over routing-table links. Each reached
// node replies once with its load (from `loads`, indexed by host, or the
// overlay's current loads when empty) and forwards while TTL remains to its
// own link targets that lie within desired_val of the origin.
NLIS probe_load(const Overlay& overlay, HostId origin, const ProbeSettings& settings,
                const DistanceOracle& oracle, std::span<const double> loads = {});

// Aggregate utilization of the origin together with its NLIS members.
double neighborhood_utilization(double origin_load, double origin_capacity, const NLIS& nlis);

enum class NodeCategory : std::uint8_t { kLight, kHeavy };

inline double target_load(double neighutil, double epsilon, double capacity) {
  return (neighutil + epsilon) * capacity;
}

// Heavy iff load > (neighutil + epsilon) * capacity.
NodeCategory categorize(double load, double capacity, double neighutil, double epsilon);

// Index of the lightest load whose removal brings `node_load` to at most
// `target`; the heaviest when none suffices. Lowest index wins ties.
// Throws std::invalid_argument on an empty list.
std::size_t choose_candidate_index(std::span<const double> vs_loads, double node_load, double target);
VsId choose_candidate_vs(const Overlay& overlay, HostId host, double target);

// Receiver selection over the NLIS (ascending node order). Entry j is
// feasible iff load_j + candidate_load < neighutil * capacity_j. The running
// best is replaced by a feasible j when their distances to the heavy node
// differ by at most qlb and j has lower utilization, or when they differ by
// more than qlb and j is closer. Hosts in `excluded` are skipped.
std::optional<HostId> find_light_node(double candidate_load, const NLIS& nlis, double neighutil, double qlb,
                                      std::span<const HostId> excluded = {});

// Per-round receiver-side arbitration of synch requests.
class SynchGate {
 public:
  enum class Reply : std::uint8_t { kAck, kReject, kTimeout };

  SynchGate(std::size_t nodes, int budget);
  // Acks iff the receiver's current load plus the incoming load stays below
  // the requester's target for it. A receiver whose load is unchanged since
  // probing therefore acks the first feasible synch; later synchs that would
  // make it heavy are rejected. Requests beyond the budget time out.
  Reply request(HostId receiver, double current_load, double incoming_load, double target);
  std::size_t acks(HostId receiver) const { return acks_.at(receiver); }

 private:
  int budget_;
  std::vector<std::size_t> requests_;
  std::vector<std::size_t> acks_;
};

// Sends a synch for moving `vs` from `heavy` to `light` and performs the
// transfer on ack.
std::optional<TransferRecord> synchronize_and_transfer(Overlay& overlay, HostId heavy, HostId light, VsId vs,
                                                       double light_target, SynchGate& gate,
                                                       const DistanceOracle& oracle, int round,
                                                       SynchGate::Reply* reply = nullptr);

struct RoundReport {
  int round = 0;
  std::vector<TransferRecord> transfers;
  std::size_t heavy_nodes = 0;
  std::size_t max_nlis = 0;
  std::size_t nlis_bound = 0;
  std::size_t bound_violations = 0;
  std::size_t rejections = 0;
  std::size_t timeouts = 0;
  double max_util_before = 0.0;
  double max_util_after = 0.0;
};

// One synchronous round: every node probes (against round-start loads),
// then categorizes, then heavy nodes reassign virtual servers in ascending
// id order. kDirectory runs the global directory baseline instead.
RoundReport run_balancing_round(Overlay& overlay, const LBParams& params, const DistanceOracle& oracle,
                                BalanceMode mode, int round, std::uint64_t seed);

// Directory baseline: one directory sees every node; heavy nodes (against
// global utilization) greedily send virtual servers to the least-utilized
// feasible node, ignoring distance.
RoundReport run_directory_round(Overlay& overlay, const LBParams& params, const DistanceOracle& oracle, int round);

// Heavy-node count under the mode's categorization at the current loads.
std::size_t count_heavy_nodes(const Overlay& overlay, const LBParams& params, const DistanceOracle& oracle,
                              BalanceMode mode, std::uint64_t seed);

}  // namespace raqlb
