#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace raqlb {

class Overlay;
class Rng;

struct CapacityClass {
  double probability = 0.0;
  double capacity = 0.0;
};

struct CapacityProfile {
  std::vector<CapacityClass> classes;

  // 20% / 45% / 30% / 4.9% / 0.1% of nodes at capacity 1 / 10 / 100 / 1000 / 10000.
  static CapacityProfile gnutella();
  // Throws std::invalid_argument unless probabilities sum to 1 (+-1e-12)
  // and every capacity is positive.
  void validate() const;
  double mean() const;
};

double sample_capacity(const CapacityProfile& profile, Rng& rng);

// Total-system load model: each virtual server with space fraction f draws
// Normal(mu * f, sigma * sqrt(f)).
struct LoadModel {
  double mu = 1.0;
  double sigma = 0.0;

  void validate() const;
};

struct LoadAssignment {
  std::size_t draws = 0;
  std::size_t truncated = 0;  // negative draws clamped to zero

  double truncation_rate() const {
    return draws == 0 ? 0.0 : static_cast<double>(truncated) / static_cast<double>(draws);
  }
};

// Draws a load for every live virtual server, in ascending id order.
LoadAssignment assign_loads(Overlay& overlay, const LoadModel& model, Rng& rng);

double region_fraction(const Overlay& overlay, std::size_t vs);

// Kolmogorov-Smirnov distance between the empirical distribution of
// `samples` and an exponential distribution with the given mean.
double exponential_ks_distance(std::span<const double> samples, double mean);

}  // namespace raqlb
