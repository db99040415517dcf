#include "raqlb/coordinates.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "raqlb/random.h"

namespace raqlb {

double estimate_distance(const NetworkCoordinate& a, const NetworkCoordinate& b) {
  if (a.dims() != b.dims()) throw std::invalid_argument("coordinates: dimension mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.dims(); ++k) {
    double d = a.components[k] - b.components[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

void EmbeddingConfig::validate() const {
  if (dims < 2) throw std::invalid_argument("embedding: dims must be >= 2");
  if (iterations < 1) throw std::invalid_argument("embedding: iterations must be >= 1");
  if (random_peers < 0 || near_peers < 0 || random_peers + near_peers < 1) {
    throw std::invalid_argument("embedding: peer counts must be non-negative with at least one peer");
  }
}

namespace {

std::vector<std::vector<std::size_t>> choose_peers(const DistanceMatrix& truth, const EmbeddingConfig& config,
                                                   Rng& rng) {
  const std::size_t n = truth.size();
  const std::size_t total = static_cast<std::size_t>(config.random_peers + config.near_peers);
  std::vector<std::vector<std::size_t>> peers(n);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    if (others.size() <= total) {
      peers[i] = others;
      continue;
    }
    auto near_count = static_cast<std::size_t>(config.near_peers);
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(near_count), others.end(),
                      [&](std::size_t a, std::size_t b) {
                        double da = truth.at(i, a), db = truth.at(i, b);
                        return da != db ? da < db : a < b;
                      });
    peers[i].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(near_count));
    // Random remainder from the non-near part.
    auto rest_begin = others.begin() + static_cast<std::ptrdiff_t>(near_count);
    rng.shuffle(rest_begin, others.end());
    peers[i].insert(peers[i].end(), rest_begin, rest_begin + config.random_peers);
  }
  return peers;
}

}  // namespace

std::vector<NetworkCoordinate> embed_coordinates(const DistanceMatrix& truth, const EmbeddingConfig& config,
                                                 std::uint64_t seed) {
  config.validate();
  const std::size_t n = truth.size();
  const auto dims = static_cast<std::size_t>(config.dims);
  Rng rng(seed);

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) scale = std::max(scale, truth.at(i, j));
  }
  if (scale <= 0.0) scale = 1.0;

  std::vector<NetworkCoordinate> coords(n);
  for (auto& c : coords) {
    c.components.resize(dims);
    for (auto& x : c.components) x = rng.uniform(-0.5, 0.5) * scale;
  }
  if (n < 2) return coords;

  auto peers = choose_peers(truth, config, rng);
  std::vector<double> delta(dims);
  for (int it = 0; it < config.iterations; ++it) {
    // Step size decays linearly so late rounds only fine-tune.
    const double progress = static_cast<double>(it) / static_cast<double>(config.iterations);
    const double step = 0.25 * (1.0 - progress) + 0.01;
    for (std::size_t i = 0; i < n; ++i) {
      auto& xi = coords[i].components;
      for (std::size_t j : peers[i]) {
        auto& xj = coords[j].components;
        double norm = 0.0;
        for (std::size_t k = 0; k < dims; ++k) {
          delta[k] = xi[k] - xj[k];
          norm += delta[k] * delta[k];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
          // Coincident points: push apart along a random direction.
          for (auto& d : delta) d = rng.uniform(-1.0, 1.0);
          norm = std::sqrt(std::inner_product(delta.begin(), delta.end(), delta.begin(), 0.0));
          if (norm < 1e-12) continue;
        }
        const double target = truth.at(i, j);
        // Pushes are capped at one target length and pulls at the current
        // separation, so a badly placed pair cannot overshoot.
        const double move = 0.5 * step * std::clamp(target - norm, -norm, target);
        for (std::size_t k = 0; k < dims; ++k) {
          const double u = delta[k] / norm * move;
          xi[k] += u;
          xj[k] -= u;
        }
      }
    }
  }
  return coords;
}

std::vector<NetworkCoordinate> embed_coordinates(const TransitStubTopology& topo,
                                                 std::span<const UnderlayId> nodes,
                                                 const EmbeddingConfig& config, std::uint64_t seed) {
  config.validate();
  return embed_coordinates(latency_matrix(topo, nodes), config, seed);
}

double median_relative_error(std::span<const NetworkCoordinate> coords, const DistanceMatrix& truth) {
  std::vector<double> errors;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = i + 1; j < coords.size(); ++j) {
      double t = truth.at(i, j);
      if (t <= 0.0) continue;
      errors.push_back(std::abs(estimate_distance(coords[i], coords[j]) - t) / t);
    }
  }
  if (errors.empty()) return 0.0;
  auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
  std::nth_element(errors.begin(), mid, errors.end());
  return *mid;
}

}  // namespace raqlb
