#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "raqlb/coordinates.h"
#include "raqlb/distance_oracle.h"
#include "raqlb/loadbalance.h"
#include "raqlb/overlay.h"
#include "raqlb/topology.h"
#include "raqlb/workload.h"

namespace raqlb {

struct ExperimentConfig {
  std::size_t nodes = 4096;
  int dims = 2;  // search-space dimensions
  int rounds = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool overwrite = false;
  std::vector<BalanceMode> modes{BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware,
                                 BalanceMode::kDirectory};
  OracleMode oracle = OracleMode::kCoordinate;
  FillMode routing_fill = FillMode::kTopologyAware;
  TransitStubConfig topology;
  EmbeddingConfig embedding;
  LBParams lb;
  // Total load mu = mu_fraction * total capacity; sigma = sigma_fraction * mu.
  // A negative sigma_fraction selects 0.1 / sqrt(total virtual servers).
  double mu_fraction = 0.6;
  double sigma_fraction = -1.0;
  CapacityProfile capacity = CapacityProfile::gnutella();

  int num_vs() const { return lb.num_vs > 0 ? lb.num_vs : default_num_vs(nodes); }
  double resolved_sigma_fraction() const;
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Sets one field from its textual key and value. Throws
// std::invalid_argument for unknown keys or unparsable values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

// "key = value" lines; '#' starts a comment. `source` names the input in
// error messages.
ExperimentConfig parse_config(std::istream& in, std::string_view source = "config");
ExperimentConfig load_config(const std::string& path);

// Every key with its current value, in the format parse_config reads.
void write_config(std::ostream& out, const ExperimentConfig& config);

}  // namespace raqlb
