#include "raqlb/metrics.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace raqlb {

double load_transfer_cost(std::span<const TransferRecord> transfers) {
  double ltc = 0.0;
  for (const auto& t : transfers) ltc += t.load * t.distance;
  return ltc;
}

double benefit(double ltc_topology, double ltc_without) {
  if (!(ltc_without > 0.0)) throw std::domain_error("benefit: topology-unaware LTC must be positive");
  return (ltc_without - ltc_topology) / ltc_without;
}

std::vector<CdfPoint> transferred_load_cdf(std::span<const TransferRecord> transfers) {
  if (transfers.empty()) throw std::invalid_argument("cdf: no transfers");
  std::vector<std::pair<double, double>> by_distance;
  by_distance.reserve(transfers.size());
  double total = 0.0;
  for (const auto& t : transfers) {
    by_distance.emplace_back(t.distance, t.load);
    total += t.load;
  }
  if (!(total > 0.0)) throw std::invalid_argument("cdf: transferred load is zero");
  std::sort(by_distance.begin(), by_distance.end());
  std::vector<CdfPoint> cdf;
  double running = 0.0;
  for (std::size_t i = 0; i < by_distance.size(); ++i) {
    running += by_distance[i].second;
    if (i + 1 < by_distance.size() && by_distance[i + 1].first == by_distance[i].first) continue;
    cdf.push_back({by_distance[i].first, running / total});
  }
  cdf.back().cum_fraction = 1.0;
  return cdf;
}

double weighted_median_distance(std::span<const TransferRecord> transfers) {
  for (const auto& p : transferred_load_cdf(transfers)) {
    if (p.cum_fraction >= 0.5) return p.latency;
  }
  return 0.0;  // unreachable: the last point is 1.0
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

UtilizationSummary utilization_summary(std::span<const ScatterPoint> points) {
  UtilizationSummary s;
  s.points.assign(points.begin(), points.end());
  if (points.empty()) return s;
  std::vector<double> util, load, cap;
  for (const auto& p : points) {
    util.push_back(p.load / p.capacity);
    load.push_back(p.load);
    cap.push_back(p.capacity);
  }
  s.max_utilization = *std::max_element(util.begin(), util.end());
  std::sort(util.begin(), util.end());
  auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(util.size())));
  s.p99_utilization = util[std::max<std::size_t>(rank, 1) - 1];
  s.correlation = pearson(load, cap);
  return s;
}

UtilizationSummary utilization_scatter(const Overlay& overlay) {
  std::vector<ScatterPoint> points;
  points.reserve(overlay.node_count());
  for (HostId h = 0; h < overlay.node_count(); ++h) {
    points.push_back({overlay.node(h).capacity, overlay.node_load(h)});
  }
  return utilization_summary(points);
}

}  // namespace raqlb
