#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "raqlb/overlay.h"

namespace raqlb {

// Sum of load * distance over the transfers.
double load_transfer_cost(std::span<const TransferRecord> transfers);

// (ltc_without - ltc_topology) / ltc_without. Throws std::domain_error when
// ltc_without is not positive.
double benefit(double ltc_topology, double ltc_without);

struct CdfPoint {
  double latency = 0.0;
  double cum_fraction = 0.0;
};

// Load-weighted CDF of transfer distances, one point per distinct distance.
// Throws std::invalid_argument on an empty list or zero total load.
std::vector<CdfPoint> transferred_load_cdf(std::span<const TransferRecord> transfers);

// Smallest distance at which the load-weighted CDF reaches 1/2.
double weighted_median_distance(std::span<const TransferRecord> transfers);

struct ScatterPoint {
  double capacity = 0.0;
  double load = 0.0;
};

struct UtilizationSummary {
  std::vector<ScatterPoint> points;  // one per node, ascending id
  double max_utilization = 0.0;
  double p99_utilization = 0.0;  // nearest rank
  double correlation = 0.0;      // Pearson(load, capacity)
};

UtilizationSummary utilization_scatter(const Overlay& overlay);
UtilizationSummary utilization_summary(std::span<const ScatterPoint> points);

// Pearson correlation; 0 when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace raqlb
