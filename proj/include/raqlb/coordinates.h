#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "raqlb/topology.h"

namespace raqlb {

// A point in the Euclidean latency space; distance between two coordinates
// estimates round-trip latency between their owners.
struct NetworkCoordinate {
  std::vector<double> components;

  std::size_t dims() const { return components.size(); }
  friend bool operator==(const NetworkCoordinate&, const NetworkCoordinate&) = default;
};

// Euclidean distance. Throws std::invalid_argument on dimension mismatch.
double estimate_distance(const NetworkCoordinate& a, const NetworkCoordinate& b);

struct EmbeddingConfig {
  int dims = 5;
  int iterations = 100;
  // Each node relaxes against a fixed peer set: this many uniformly random
  // peers plus this many of its nearest peers by true latency.
  int random_peers = 48;
  int near_peers = 16;

  void validate() const;
};

// Spring-relaxation embedding of `truth` (pairwise true latencies) into
// `config.dims` Euclidean dimensions. Result i corresponds to row i.
std::vector<NetworkCoordinate> embed_coordinates(const DistanceMatrix& truth, const EmbeddingConfig& config,
                                                 std::uint64_t seed);

// Embeds the listed underlay nodes using their shortest-path latencies.
std::vector<NetworkCoordinate> embed_coordinates(const TransitStubTopology& topo,
                                                 std::span<const UnderlayId> nodes,
                                                 const EmbeddingConfig& config, std::uint64_t seed);

// Median over all pairs i<j with truth > 0 of |estimate - truth| / truth.
double median_relative_error(std::span<const NetworkCoordinate> coords, const DistanceMatrix& truth);

}  // namespace raqlb
