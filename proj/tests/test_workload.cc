#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "raqlb/overlay.h"
#include "raqlb/random.h"
#include "raqlb/workload.h"

using namespace raqlb;

TEST_CASE("gnutella capacity mean and class frequencies") {
  const auto profile = CapacityProfile::gnutella();
  double expected = 0.0;
  for (const auto& c : profile.classes) expected += c.probability * c.capacity;
  CHECK(expected == doctest::Approx(93.7));
  CHECK(profile.mean() == doctest::Approx(93.7));

  Rng rng(12345);
  const int n = 1000000;
  std::vector<int> counts(profile.classes.size(), 0);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cap = sample_capacity(profile, rng);
    sum += cap;
    for (std::size_t k = 0; k < profile.classes.size(); ++k) {
      if (cap == profile.classes[k].capacity) ++counts[k];
    }
  }
  CHECK(std::abs(sum / n - 93.7) <= 0.05 * 93.7);
  for (std::size_t k = 0; k < profile.classes.size(); ++k) {
    CHECK(std::abs(static_cast<double>(counts[k]) / n - profile.classes[k].probability) <= 0.005);
  }
}

TEST_CASE("single-class profile") {
  CapacityProfile p{{{1.0, 7.0}}};
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_capacity(p, rng) == 7.0);
}

TEST_CASE("profile validation") {
  CHECK_THROWS_AS((CapacityProfile{{{0.5, 1.0}, {0.4, 2.0}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((CapacityProfile{{{1.0, 0.0}}}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(CapacityProfile{}.validate(), std::invalid_argument);
  CHECK_NOTHROW(CapacityProfile::gnutella().validate());
}

TEST_CASE("zero sigma gives exact mu times f") {
  Overlay o(Box::unit(2));
  Rng rng(3);
  for (int h = 0; h < 20; ++h) o.add_node(1.0);
  for (HostId h = 0; h < 20; ++h) o.join_node(h, 5, rng);
  auto result = assign_loads(o, LoadModel{250.0, 0.0}, rng);
  CHECK(result.draws == 100);
  CHECK(result.truncated == 0);
  double total = 0.0;
  for (VsId v : o.live_vs()) {
    CHECK(o.vs(v).load == 250.0 * o.fraction(v));
    CHECK(region_fraction(o, v) == o.fraction(v));
    total += o.vs(v).load;
  }
  CHECK(total == doctest::Approx(250.0).epsilon(1e-12));
}

TEST_CASE("per-server variance is sigma squared times f") {
  Overlay o(Box::unit(1));
  o.add_node(1.0);
  const VsId big = o.join_at(0, std::vector<double>{0.5});
  const VsId small = o.split(big, 0, 0.01, Side::kMinus, 0);
  REQUIRE(o.fraction(small) == doctest::Approx(0.01));
  const LoadModel model{1000.0, 10.0};
  Rng rng(99);
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    assign_loads(o, model, rng);
    const double x = o.vs(small).load;
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(10.0).epsilon(0.01));
  CHECK(std::abs(var - 100.0 * 0.01) <= 0.1 * 100.0 * 0.01);
}

TEST_CASE("negative draws are truncated and counted") {
  Overlay o(Box::unit(2));
  Rng rng(5);
  for (int h = 0; h < 30; ++h) o.add_node(1.0);
  for (HostId h = 0; h < 30; ++h) o.join_node(h, 4, rng);
  auto result = assign_loads(o, LoadModel{1.0, 5.0}, rng);
  CHECK(result.truncated > 0);
  CHECK(result.truncation_rate() == doctest::Approx(static_cast<double>(result.truncated) / 120.0));
  for (VsId v : o.live_vs()) CHECK(o.vs(v).load >= 0.0);
  CHECK_THROWS_AS((LoadModel{0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LoadModel{1.0, -1.0}.validate()), std::invalid_argument);
}

TEST_CASE("region fractions are roughly exponential at 4096 servers") {
  // Threshold from ten oracle runs (KS distance 0.134 to 0.144 in 2-d).
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Overlay o(Box::unit(2));
    Rng rng(seed);
    for (int h = 0; h < 512; ++h) o.add_node(1.0);
    for (HostId h = 0; h < 512; ++h) o.join_node(h, 8, rng);
    std::vector<double> f;
    for (VsId v : o.live_vs()) f.push_back(o.fraction(v));
    CHECK(exponential_ks_distance(f, 1.0 / 4096) <= 0.16);
  }
}

TEST_CASE("KS distance sanity") {
  std::vector<double> exact;
  const int n = 1000;
  for (int i = 0; i < n; ++i) exact.push_back(-std::log(1.0 - (i + 0.5) / n));
  CHECK(exponential_ks_distance(exact, 1.0) <= 0.001);
  std::vector<double> constant(n, 1.0);
  CHECK(exponential_ks_distance(constant, 1.0) > 0.3);
}
