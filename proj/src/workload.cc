#include "raqlb/workload.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "raqlb/overlay.h"
#include "raqlb/random.h"

namespace raqlb {

CapacityProfile CapacityProfile::gnutella() {
  return CapacityProfile{{{0.20, 1.0}, {0.45, 10.0}, {0.30, 100.0}, {0.049, 1000.0}, {0.001, 10000.0}}};
}

void CapacityProfile::validate() const {
  if (classes.empty()) throw std::invalid_argument("capacity profile: no classes");
  double sum = 0.0;
  for (const auto& c : classes) {
    if (!(c.probability >= 0.0)) throw std::invalid_argument("capacity profile: negative probability");
    if (!(c.capacity > 0.0)) throw std::invalid_argument("capacity profile: capacities must be positive");
    sum += c.probability;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("capacity profile: probabilities must sum to 1");
}

double CapacityProfile::mean() const {
  double m = 0.0;
  for (const auto& c : classes) m += c.probability * c.capacity;
  return m;
}

double sample_capacity(const CapacityProfile& profile, Rng& rng) {
  const double u = rng.uniform01();
  double cumulative = 0.0;
  for (const auto& c : profile.classes) {
    cumulative += c.probability;
    if (u < cumulative) return c.capacity;
  }
  // Rounding in the cumulative sum: fall back to the last class with mass.
  for (auto it = profile.classes.rbegin(); it != profile.classes.rend(); ++it) {
    if (it->probability > 0.0) return it->capacity;
  }
  return profile.classes.back().capacity;
}

void LoadModel::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("load model: mu must be positive");
  if (!(sigma >= 0.0)) throw std::invalid_argument("load model: sigma must be non-negative");
}

LoadAssignment assign_loads(Overlay& overlay, const LoadModel& model, Rng& rng) {
  model.validate();
  LoadAssignment result;
  for (VsId id : overlay.live_vs()) {
    const double f = overlay.fraction(id);
    double load = model.mu * f;
    if (model.sigma > 0.0) load += model.sigma * std::sqrt(f) * rng.normal();
    ++result.draws;
    if (load < 0.0) {
      load = 0.0;
      ++result.truncated;
    }
    overlay.set_load(id, load);
  }
  return result;
}

double region_fraction(const Overlay& overlay, std::size_t vs) {
  return overlay.fraction(static_cast<VsId>(vs));
}

double exponential_ks_distance(std::span<const double> samples, double mean) {
  if (samples.empty()) return 0.0;
  if (!(mean > 0.0)) throw std::invalid_argument("ks: mean must be positive");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = 1.0 - std::exp(-sorted[i] / mean);
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - cdf)});
  }
  return d;
}

}  // namespace raqlb
