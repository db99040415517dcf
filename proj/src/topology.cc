#include "raqlb/topology.h"

#include <fmt/format.h>

#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>

#include "raqlb/random.h"

namespace raqlb {

namespace {

void check_range(const LatencyRange& r, const char* name) {
  if (!(r.lo > 0.0) || !(r.hi >= r.lo)) {
    throw std::invalid_argument(fmt::format("topology: {} latency range must satisfy 0 < lo <= hi", name));
  }
}

// Random spanning tree over `ids` plus extra random edges, all with
// latencies drawn from `range`.
void connect_cluster(const std::vector<UnderlayId>& ids, const LatencyRange& range,
                     double extra_edges, Rng& rng, std::vector<UnderlayEdge>& edges) {
  for (std::size_t i = 1; i < ids.size(); ++i) {
    auto parent = ids[rng.below(i)];
    edges.push_back({parent, ids[i], rng.uniform(range.lo, range.hi)});
  }
  if (ids.size() < 3) return;
  auto extra = static_cast<std::size_t>(extra_edges * static_cast<double>(ids.size()));
  for (std::size_t k = 0; k < extra; ++k) {
    auto a = ids[rng.below(ids.size())];
    auto b = ids[rng.below(ids.size())];
    if (a == b) continue;
    edges.push_back({a, b, rng.uniform(range.lo, range.hi)});
  }
}

}  // namespace

std::size_t TransitStubConfig::expected_node_count() const {
  auto transit = static_cast<std::size_t>(transit_domains) * static_cast<std::size_t>(transit_nodes_per_domain);
  return transit * (1 + static_cast<std::size_t>(stub_domains_per_transit_node) *
                            static_cast<std::size_t>(mean_stub_nodes));
}

void TransitStubConfig::validate() const {
  if (transit_domains < 1 || transit_nodes_per_domain < 1 || stub_domains_per_transit_node < 1 ||
      mean_stub_nodes < 1) {
    throw std::invalid_argument("topology: all structural counts must be >= 1");
  }
  check_range(intra_stub, "intra-stub");
  check_range(stub_transit, "stub-transit");
  check_range(transit_transit, "transit-transit");
  if (!(intra_stub.mean() < stub_transit.mean() && stub_transit.mean() < transit_transit.mean())) {
    throw std::invalid_argument("topology: latency tiers must satisfy intra-stub < stub-transit < transit-transit");
  }
  if (transit_edge_probability < 0.0 || transit_edge_probability > 1.0 || stub_extra_edges_per_node < 0.0) {
    throw std::invalid_argument("topology: edge densities out of range");
  }
  if (expected_node_count() > max_nodes) {
    throw std::invalid_argument(fmt::format("topology: expected node count {} exceeds cap {}",
                                            expected_node_count(), max_nodes));
  }
}

TransitStubTopology::TransitStubTopology(std::size_t node_count, std::vector<UnderlayEdge> edges,
                                         std::vector<UnderlayKind> kinds)
    : edges_(std::move(edges)), kinds_(std::move(kinds)), adjacency_(node_count) {
  if (kinds_.empty()) kinds_.assign(node_count, UnderlayKind::kStub);
  if (kinds_.size() != node_count) throw std::invalid_argument("topology: kind list size mismatch");
  for (const auto& e : edges_) {
    if (e.a >= node_count || e.b >= node_count) throw std::invalid_argument("topology: edge endpoint out of range");
    if (!(e.latency > 0.0)) throw std::invalid_argument("topology: edge latency must be positive");
    adjacency_[e.a].push_back({e.b, e.latency});
    adjacency_[e.b].push_back({e.a, e.latency});
  }
}

std::vector<UnderlayId> TransitStubTopology::nodes_of_kind(UnderlayKind kind) const {
  std::vector<UnderlayId> out;
  for (UnderlayId i = 0; i < kinds_.size(); ++i) {
    if (kinds_[i] == kind) out.push_back(i);
  }
  return out;
}

bool TransitStubTopology::is_connected() const {
  if (adjacency_.empty()) return true;
  std::vector<char> seen(adjacency_.size(), 0);
  std::vector<UnderlayId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto n = stack.back();
    stack.pop_back();
    for (const auto& nb : adjacency_[n]) {
      if (!seen[nb.node]) {
        seen[nb.node] = 1;
        ++count;
        stack.push_back(nb.node);
      }
    }
  }
  return count == adjacency_.size();
}

TransitStubTopology generate_transit_stub(const TransitStubConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<UnderlayEdge> edges;
  std::vector<UnderlayKind> kinds;
  UnderlayId next = 0;

  // Transit domains.
  std::vector<std::vector<UnderlayId>> domains(config.transit_domains);
  for (auto& domain : domains) {
    for (int t = 0; t < config.transit_nodes_per_domain; ++t) {
      domain.push_back(next++);
      kinds.push_back(UnderlayKind::kTransit);
    }
    connect_cluster(domain, config.transit_transit, 0.0, rng, edges);
    for (std::size_t i = 0; i < domain.size(); ++i) {
      for (std::size_t j = i + 1; j < domain.size(); ++j) {
        if (rng.uniform01() < config.transit_edge_probability) {
          edges.push_back({domain[i], domain[j],
                           rng.uniform(config.transit_transit.lo, config.transit_transit.hi)});
        }
      }
    }
  }
  // Inter-domain links: a random tree over domains plus extra links.
  auto pick = [&](const std::vector<UnderlayId>& d) { return d[rng.below(d.size())]; };
  for (std::size_t d = 1; d < domains.size(); ++d) {
    auto other = rng.below(d);
    edges.push_back({pick(domains[other]), pick(domains[d]),
                     rng.uniform(config.transit_transit.lo, config.transit_transit.hi)});
  }
  for (std::size_t d = 0; d < domains.size(); ++d) {
    for (std::size_t e = d + 1; e < domains.size(); ++e) {
      if (rng.uniform01() < config.transit_edge_probability) {
        edges.push_back({pick(domains[d]), pick(domains[e]),
                         rng.uniform(config.transit_transit.lo, config.transit_transit.hi)});
      }
    }
  }

  // Stub domains hang off each transit node through one gateway edge. Stub
  // sizes are uniform on [1, 2*mean-1].
  for (const auto& domain : domains) {
    for (UnderlayId transit : domain) {
      for (int s = 0; s < config.stub_domains_per_transit_node; ++s) {
        auto size = 1 + rng.below(static_cast<std::uint64_t>(2 * config.mean_stub_nodes - 1));
        std::vector<UnderlayId> stub;
        for (std::uint64_t k = 0; k < size; ++k) {
          stub.push_back(next++);
          kinds.push_back(UnderlayKind::kStub);
        }
        connect_cluster(stub, config.intra_stub, config.stub_extra_edges_per_node, rng, edges);
        edges.push_back({transit, stub[rng.below(stub.size())],
                         rng.uniform(config.stub_transit.lo, config.stub_transit.hi)});
      }
    }
  }

  TransitStubTopology topo(next, std::move(edges), std::move(kinds));
  topo.transit_domains = config.transit_domains;
  topo.transit_nodes_per_domain = config.transit_nodes_per_domain;
  topo.stub_domains_per_transit_node = config.stub_domains_per_transit_node;
  topo.mean_stub_nodes = config.mean_stub_nodes;
  return topo;
}

std::vector<double> shortest_path_latencies(const TransitStubTopology& topo, UnderlayId source) {
  if (source >= topo.node_count()) throw std::out_of_range("topology: unknown node id");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(topo.node_count(), kInf);
  using Item = std::pair<double, UnderlayId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, n] = queue.top();
    queue.pop();
    if (d > dist[n]) continue;
    for (const auto& nb : topo.neighbors(n)) {
      double nd = d + nb.latency;
      if (nd < dist[nb.node]) {
        dist[nb.node] = nd;
        queue.push({nd, nb.node});
      }
    }
  }
  return dist;
}

double shortest_path_latency(const TransitStubTopology& topo, UnderlayId a, UnderlayId b) {
  if (b >= topo.node_count()) throw std::out_of_range("topology: unknown node id");
  if (a == b) {
    if (a >= topo.node_count()) throw std::out_of_range("topology: unknown node id");
    return 0.0;
  }
  return shortest_path_latencies(topo, a)[b];
}

std::vector<double> hop_counts(const TransitStubTopology& topo, UnderlayId source) {
  if (source >= topo.node_count()) throw std::out_of_range("topology: unknown node id");
  std::vector<double> hops(topo.node_count(), std::numeric_limits<double>::infinity());
  std::queue<UnderlayId> queue;
  hops[source] = 0.0;
  queue.push(source);
  while (!queue.empty()) {
    auto n = queue.front();
    queue.pop();
    for (const auto& nb : topo.neighbors(n)) {
      if (hops[nb.node] == std::numeric_limits<double>::infinity()) {
        hops[nb.node] = hops[n] + 1.0;
        queue.push(nb.node);
      }
    }
  }
  return hops;
}

std::vector<UnderlayId> attach_hosts(const TransitStubTopology& topo, std::size_t hosts, Rng& rng) {
  auto stubs = topo.nodes_of_kind(UnderlayKind::kStub);
  if (stubs.empty()) throw std::invalid_argument("topology: no stub nodes to attach hosts to");
  std::vector<UnderlayId> out(hosts);
  for (auto& a : out) a = stubs[rng.below(stubs.size())];
  return out;
}

namespace {

template <class SingleSource>
DistanceMatrix pairwise(const TransitStubTopology& topo, std::span<const UnderlayId> nodes,
                        SingleSource single_source) {
  DistanceMatrix m(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto row = single_source(topo, nodes[i]);
    for (std::size_t j = i + 1; j < nodes.size(); ++j) m.set(i, j, row[nodes[j]]);
  }
  return m;
}

}  // namespace

DistanceMatrix latency_matrix(const TransitStubTopology& topo, std::span<const UnderlayId> nodes) {
  return pairwise(topo, nodes, shortest_path_latencies);
}

DistanceMatrix hop_matrix(const TransitStubTopology& topo, std::span<const UnderlayId> nodes) {
  return pairwise(topo, nodes, hop_counts);
}

void write_edge_list(std::ostream& out, const TransitStubTopology& topo) {
  out << "# nodes " << topo.node_count() << '\n';
  for (const auto& e : topo.edges()) out << fmt::format("{} {} {}\n", e.a, e.b, e.latency);
}

TransitStubTopology read_edge_list(std::istream& in) {
  std::string line;
  std::size_t nodes = 0;
  bool have_header = false;
  std::vector<UnderlayEdge> edges;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    if (line[0] == '#') {
      std::string hash, key;
      ss >> hash >> key;
      if (key == "nodes" && (ss >> nodes)) have_header = true;
      continue;
    }
    UnderlayEdge e;
    if (!(ss >> e.a >> e.b >> e.latency)) {
      throw std::invalid_argument(fmt::format("edge list: malformed line {}", line_no));
    }
    edges.push_back(e);
  }
  if (!have_header) throw std::invalid_argument("edge list: missing '# nodes <n>' header");
  return TransitStubTopology(nodes, std::move(edges));
}

}  // namespace raqlb
