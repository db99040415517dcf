#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "raqlb/coordinates.h"
#include "raqlb/topology.h"

namespace raqlb {

using HostId = std::uint32_t;

enum class OracleMode : std::uint8_t {
  kExact,       // shortest-path latency in the underlay
  kCoordinate,  // Euclidean distance between embedded coordinates
  kHops,        // shortest-path hop count in the underlay
};

OracleMode parse_oracle_mode(std::string_view name);
std::string_view to_string(OracleMode mode);

// Network distance between overlay hosts. Every mode answers from a dense
// host-by-host table built once; the object is immutable afterwards and can
// be shared read-only between simulation instances.
class DistanceOracle {
 public:
  DistanceOracle() = default;

  // `truth` must be latency_matrix(topology, attachments) or, for kHops,
  // hop_matrix(...). Coordinates are kept for every mode because probe
  // replies carry them.
  static DistanceOracle from_matrix(OracleMode mode, DistanceMatrix table,
                                    std::vector<NetworkCoordinate> coordinates = {});
  static DistanceOracle from_coordinates(std::vector<NetworkCoordinate> coordinates);

  OracleMode mode() const { return mode_; }
  std::size_t size() const { return table_.size(); }
  double distance(HostId a, HostId b) const { return table_.at(a, b); }
  const NetworkCoordinate& coordinate(HostId h) const;
  bool has_coordinates() const { return !coordinates_.empty(); }

 private:
  OracleMode mode_ = OracleMode::kExact;
  DistanceMatrix table_;
  std::vector<NetworkCoordinate> coordinates_;
};

}  // namespace raqlb
