#include "raqlb/distance_oracle.h"

#include <fmt/format.h>

#include <stdexcept>
#include <string>

namespace raqlb {

OracleMode parse_oracle_mode(std::string_view name) {
  if (name == "exact") return OracleMode::kExact;
  if (name == "coordinate") return OracleMode::kCoordinate;
  if (name == "hops") return OracleMode::kHops;
  throw std::invalid_argument(fmt::format("unknown oracle mode '{}'", name));
}

std::string_view to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::kExact: return "exact";
    case OracleMode::kCoordinate: return "coordinate";
    case OracleMode::kHops: return "hops";
  }
  return "?";
}

DistanceOracle DistanceOracle::from_matrix(OracleMode mode, DistanceMatrix table,
                                           std::vector<NetworkCoordinate> coordinates) {
  if (!coordinates.empty() && coordinates.size() != table.size()) {
    throw std::invalid_argument("oracle: coordinate count does not match table size");
  }
  DistanceOracle o;
  o.mode_ = mode;
  o.table_ = std::move(table);
  o.coordinates_ = std::move(coordinates);
  return o;
}

DistanceOracle DistanceOracle::from_coordinates(std::vector<NetworkCoordinate> coordinates) {
  DistanceMatrix table(coordinates.size());
  for (std::size_t i = 0; i < coordinates.size(); ++i) {
    for (std::size_t j = i + 1; j < coordinates.size(); ++j) {
      table.set(i, j, estimate_distance(coordinates[i], coordinates[j]));
    }
  }
  return from_matrix(OracleMode::kCoordinate, std::move(table), std::move(coordinates));
}

const NetworkCoordinate& DistanceOracle::coordinate(HostId h) const {
  if (coordinates_.empty()) throw std::logic_error("oracle: no coordinates attached");
  return coordinates_.at(h);
}

}  // namespace raqlb
