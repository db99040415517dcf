#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace raqlb {

class Rng;

using UnderlayId = std::uint32_t;

struct LatencyRange {
  double lo = 0.0;
  double hi = 0.0;
  double mean() const { return 0.5 * (lo + hi); }
};

// Parameters of the hierarchical transit-stub model. Latencies are in
// abstract latency units; the three tiers must be ordered
// intra-stub < stub-transit < transit-transit by mean.
struct TransitStubConfig {
  int transit_domains = 4;
  int transit_nodes_per_domain = 4;
  int stub_domains_per_transit_node = 5;
  int mean_stub_nodes = 55;
  LatencyRange intra_stub{1.0, 10.0};
  LatencyRange stub_transit{10.0, 40.0};
  LatencyRange transit_transit{40.0, 120.0};
  // Probability of an extra edge between two transit nodes of one domain,
  // and between two transit domains.
  double transit_edge_probability = 0.5;
  // Extra random intra-stub edges per stub node (on top of a spanning tree).
  double stub_extra_edges_per_node = 0.5;
  std::size_t max_nodes = 250000;

  std::size_t expected_node_count() const;
  void validate() const;
};

enum class UnderlayKind : std::uint8_t { kTransit, kStub };

struct UnderlayEdge {
  UnderlayId a = 0;
  UnderlayId b = 0;
  double latency = 0.0;

  friend bool operator==(const UnderlayEdge&, const UnderlayEdge&) = default;
};

// Undirected weighted underlay graph. Immutable once built.
class TransitStubTopology {
 public:
  struct Neighbor {
    UnderlayId node;
    double latency;
  };

  TransitStubTopology() = default;
  // Throws std::invalid_argument on out-of-range endpoints or non-positive
  // latencies.
  TransitStubTopology(std::size_t node_count, std::vector<UnderlayEdge> edges,
                      std::vector<UnderlayKind> kinds = {});

  std::size_t node_count() const { return adjacency_.size(); }
  const std::vector<UnderlayEdge>& edges() const { return edges_; }
  std::span<const Neighbor> neighbors(UnderlayId n) const { return adjacency_.at(n); }
  UnderlayKind kind(UnderlayId n) const { return kinds_.at(n); }
  std::vector<UnderlayId> nodes_of_kind(UnderlayKind kind) const;
  bool is_connected() const;

  // Structural counts recorded at generation time (zero for graphs built
  // from raw edges).
  int transit_domains = 0;
  int transit_nodes_per_domain = 0;
  int stub_domains_per_transit_node = 0;
  int mean_stub_nodes = 0;

 private:
  std::vector<UnderlayEdge> edges_;
  std::vector<UnderlayKind> kinds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

TransitStubTopology generate_transit_stub(const TransitStubConfig& config, std::uint64_t seed);

// Single-source shortest-path latencies (Dijkstra).
std::vector<double> shortest_path_latencies(const TransitStubTopology& topo, UnderlayId source);
double shortest_path_latency(const TransitStubTopology& topo, UnderlayId a, UnderlayId b);
// Single-source hop counts (BFS).
std::vector<double> hop_counts(const TransitStubTopology& topo, UnderlayId source);

// Picks one stub node per overlay host, uniformly with replacement.
std::vector<UnderlayId> attach_hosts(const TransitStubTopology& topo, std::size_t hosts, Rng& rng);

// Dense symmetric matrix of pairwise distances between a list of points.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

// Shortest-path latencies (or hop counts) between the listed underlay nodes.
DistanceMatrix latency_matrix(const TransitStubTopology& topo, std::span<const UnderlayId> nodes);
DistanceMatrix hop_matrix(const TransitStubTopology& topo, std::span<const UnderlayId> nodes);

// Line-oriented edge list: a "# nodes <n>" header followed by one
// "src dst latency" line per edge. Latencies use round-trip precision.
void write_edge_list(std::ostream& out, const TransitStubTopology& topo);
TransitStubTopology read_edge_list(std::istream& in);

}  // namespace raqlb
