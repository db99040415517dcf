#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raqlb/distance_oracle.h"
#include "raqlb/topology.h"

namespace raqlb {

class Rng;

using VsId = std::uint32_t;
inline constexpr VsId kNoVs = std::numeric_limits<VsId>::max();

enum class Side : std::uint8_t { kMinus, kPlus };

inline Side opposite(Side s) { return s == Side::kMinus ? Side::kPlus : Side::kMinus; }

// One (hyperplane, side) pair of a plane equation. The hyperplane is
// axis-aligned: x[dim] = threshold. The plus side is x[dim] >= threshold.
struct Label {
  std::uint16_t dim = 0;
  double threshold = 0.0;
  Side side = Side::kMinus;

  bool admits(std::span<const double> point) const {
    return (point[dim] >= threshold) == (side == Side::kPlus);
  }
  friend bool operator==(const Label&, const Label&) = default;
};

// Ordered labels from the partition-tree root down to a leaf.
struct PlaneEquation {
  std::vector<Label> labels;

  std::size_t depth() const { return labels.size(); }
  bool contains(std::span<const double> point) const { return matched_prefix(point) == labels.size(); }
  // Number of leading labels whose half-space holds `point`.
  std::size_t matched_prefix(std::span<const double> point) const;
  // Number of leading labels equal in both equations.
  std::size_t common_prefix(const PlaneEquation& other) const;
  // "[(x0=4,+),(x1=3,+)]"
  std::string to_string() const;

  friend bool operator==(const PlaneEquation&, const PlaneEquation&) = default;
};

// Axis-aligned box [lo, hi).
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return lo.size(); }
  double volume() const;
  bool contains(std::span<const double> point) const;
  std::vector<double> center() const;
  bool overlaps(const Box& other) const;

  static Box unit(int dims);
  friend bool operator==(const Box&, const Box&) = default;
};

struct RoutingEntry {
  VsId target = kNoVs;
  // Set when the target's host asked referrers to replace it and no
  // alternative was available.
  bool marked = false;
};

// Row r points at a virtual server whose PE agrees with the owner's on the
// first r labels and takes the opposite side of label r (0-based).
struct RoutingTable {
  std::vector<RoutingEntry> rows;

  std::size_t entry_count() const;
};

struct VirtualServer {
  VsId id = kNoVs;
  PlaneEquation pe;
  // Sample point that created this leaf; always inside the region.
  std::vector<double> point;
  double load = 0.0;
  HostId host = 0;
  RoutingTable routing;
  bool alive = false;
  int tree_node = -1;
};

struct PhysicalNode {
  HostId id = 0;
  double capacity = 1.0;
  UnderlayId attachment = 0;
  std::vector<VsId> virtual_servers;  // ascending
  // Routing-table entries anywhere in the overlay that target one of this
  // node's virtual servers. Maintained incrementally.
  std::size_t in_degree = 0;
};

enum class FillMode : std::uint8_t { kTopologyAware, kTopologyUnaware };

FillMode parse_fill_mode(std::string_view name);
std::string_view to_string(FillMode mode);

struct RoutingPolicy {
  FillMode mode = FillMode::kTopologyUnaware;
  const DistanceOracle* oracle = nullptr;  // required for kTopologyAware
  std::uint64_t seed = 0;
};

// One virtual-server move between physical nodes.
struct TransferRecord {
  double load = 0.0;
  HostId source = 0;
  HostId destination = 0;
  double distance = 0.0;
  int round = 0;
  VsId vs = kNoVs;
  // Audit fields filled by the balancer: receiver load right after the move
  // and the target load T_j it was admitted against.
  double receiver_load_after = 0.0;
  double receiver_target = 0.0;
};

struct DepartureResult {
  // Virtual server that now owns the departed region.
  VsId absorber = kNoVs;
  // When the departed leaf's sibling was internal, a leaf pair inside that
  // subtree was merged to free `absorber`; `merged_into` took its old region.
  VsId merged_into = kNoVs;
};

// RAQNet search-space partition tree with virtual servers as leaves.
class Overlay {
 public:
  explicit Overlay(Box space);

  const Box& space() const { return space_; }
  std::size_t dims() const { return space_.dims(); }

  // --- physical nodes ---
  HostId add_node(double capacity, UnderlayId attachment = 0);
  std::size_t node_count() const { return nodes_.size(); }
  const PhysicalNode& node(HostId h) const { return nodes_.at(h); }
  void set_capacity(HostId h, double capacity);
  double node_load(HostId h) const;
  double utilization(HostId h) const { return node_load(h) / node(h).capacity; }
  double total_load() const;

  // --- virtual servers ---
  std::size_t vs_count() const { return live_count_; }
  // Ids ever allocated; dead ids are never reused.
  std::size_t vs_capacity() const { return servers_.size(); }
  const VirtualServer& vs(VsId id) const { return servers_.at(id); }
  bool alive(VsId id) const { return id < servers_.size() && servers_[id].alive; }
  std::vector<VsId> live_vs() const;
  const Box& region(VsId id) const;
  // Volume of the region over volume of the space.
  double fraction(VsId id) const { return region(id).volume() / space_.volume(); }
  double total_fraction() const;
  void set_load(VsId id, double load);

  // --- structure ---
  // Samples `num_vs` uniform points and joins one virtual server at each.
  std::vector<VsId> join_node(HostId host, int num_vs, Rng& rng);
  // Joins a virtual server for `host` at `point`: the first one owns the
  // whole space; later ones split the leaf containing the point through the
  // midpoint between its sample point and `point`, along the dimension where
  // the two differ most.
  VsId join_at(HostId host, std::span<const double> point);
  // Splits `occupant`'s leaf with the hyperplane x[dim] = threshold; a new
  // virtual server on `host` takes the `new_side` half.
  VsId split(VsId occupant, std::uint16_t dim, double threshold, Side new_side, HostId host);
  // Removes a virtual server. Its sibling leaf takes the region when the
  // sibling is a leaf. Otherwise the deepest leaf pair in the sibling
  // subtree is merged and the freed virtual server takes the region.
  // Loads follow regions. Throws std::logic_error on the last server.
  DepartureResult depart_virtual_server(VsId id);
  // Moves a virtual server between hosts, keeping its region and load.
  // Throws std::invalid_argument if `from` does not host it.
  TransferRecord transfer_virtual_server(VsId id, HostId from, HostId to, const DistanceOracle& oracle);

  // Leaf containing `point`, by descending the partition tree.
  VsId locate(std::span<const double> point) const;
  // Greedy prefix routing from `origin`; returns the visited servers,
  // origin first. See the README for the fallback closeness rule.
  std::vector<VsId> route_query(VsId origin, std::span<const double> target) const;

  // --- routing tables ---
  // Fills every table with `policy` and keeps them maintained through later
  // joins, departures, and transfers.
  void build_routing_tables(const RoutingPolicy& policy);
  bool routing_enabled() const { return routing_enabled_; }
  const RoutingPolicy& routing_policy() const { return policy_; }
  // All live servers eligible for row `row` of `id`, in partition-tree order.
  std::vector<VsId> row_candidates(VsId id, std::size_t row) const;
  // Picks a row entry among `candidates` (already filtered) per `policy`;
  // the result does not depend on candidate order.
  VsId select_candidate(VsId owner, std::size_t row, std::span<const VsId> candidates,
                        const RoutingPolicy& policy) const;
  RoutingTable compute_routing_table(VsId id, const RoutingPolicy& policy) const;
  void install_routing_table(VsId id, RoutingTable table);

  // Reactive in-degree repair: marks every entry that targets `host`, then
  // replaces each marked entry with an alternative from the same row's
  // candidates, excluding servers on marked hosts. Returns the number of
  // replaced entries.
  std::size_t handle_heavy_load(HostId host);
  bool heavy_marked(HostId host) const { return host < heavy_marked_.size() && heavy_marked_[host]; }

  // Full recount of in-degrees from the routing tables.
  std::vector<std::size_t> recount_in_degrees() const;
  // Number of entries targeting a virtual server (maintained).
  std::size_t references(VsId id) const { return ref_count_.at(id); }

  // Consistency audit: tiling, PE/region agreement, connection rule,
  // in-degree bookkeeping, host membership. Empty when consistent.
  std::vector<std::string> audit() const;

  // Text snapshot: one line per live virtual server,
  // "<id> <host> <pe> <f> <load>" with pe labels as "dim:threshold:side"
  // joined by commas, or "-" for the root.
  void write_snapshot(std::ostream& out) const;

 private:
  struct TreeNode {
    int parent = -1;
    int child[2] = {-1, -1};  // indexed by Side
    std::uint16_t dim = 0;
    double threshold = 0.0;
    int depth = 0;
    Box region;
    VsId vs = kNoVs;
    bool is_leaf() const { return child[0] < 0; }
  };

  VsId new_vs(HostId host, std::vector<double> point, int tree_node);
  int new_tree_node(int parent, Box region, int depth);
  void attach_to_host(VsId id, HostId host);
  void detach_from_host(VsId id);
  std::vector<int> path_to(VsId id) const;
  void collect_leaves(int tree_node, std::vector<VsId>& out) const;
  std::vector<VsId> filtered_candidates(VsId owner, std::size_t row, bool allow_fallback) const;

  void set_entry(VsId owner, std::size_t row, VsId target);
  void clear_table(VsId owner);
  void pop_row(VsId owner);
  void refill_row(VsId owner, std::size_t row);
  void refill_table(VsId owner);
  std::vector<std::pair<VsId, std::size_t>> referrers(VsId target) const;

  Box space_;
  std::vector<TreeNode> tree_;
  int root_ = -1;
  std::vector<VirtualServer> servers_;
  std::vector<PhysicalNode> nodes_;
  std::vector<std::size_t> ref_count_;
  std::vector<char> heavy_marked_;
  std::size_t live_count_ = 0;
  bool routing_enabled_ = false;
  RoutingPolicy policy_;
};

// Standalone form of Overlay::compute_routing_table.
RoutingTable fill_routing_table(const Overlay& overlay, VsId id, const RoutingPolicy& policy);

struct InDegreeHistogram {
  std::vector<std::size_t> per_node;
  // (in-degree, fraction of nodes with in-degree <= value), ascending.
  std::vector<std::pair<std::size_t, double>> cdf;
  double mean = 0.0;
  double variance = 0.0;
  std::size_t max = 0;
};

InDegreeHistogram in_degree_histogram(const Overlay& overlay);

}  // namespace raqlb
