#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <vector>

#include "raqlb/experiment.h"
#include "raqlb/loadbalance.h"
#include "raqlb/overlay.h"
#include "raqlb/random.h"

using namespace raqlb;

namespace {

DistanceOracle line_oracle(std::size_t hosts, double spacing) {
  std::vector<NetworkCoordinate> c;
  for (std::size_t i = 0; i < hosts; ++i) c.push_back({{static_cast<double>(i) * spacing, 0.0}});
  return DistanceOracle::from_coordinates(c);
}

Overlay uniform_overlay(int hosts, int num_vs, std::uint64_t seed, const DistanceOracle& oracle) {
  Overlay o(Box::unit(2));
  Rng rng(seed);
  for (int h = 0; h < hosts; ++h) o.add_node(1.0);
  for (HostId h = 0; h < static_cast<HostId>(hosts); ++h) o.join_node(h, num_vs, rng);
  o.build_routing_tables({FillMode::kTopologyAware, &oracle, seed});
  for (VsId v : o.live_vs()) o.set_load(v, 1.0);
  return o;
}

LoadInfoEntry entry(HostId node, double load, double capacity, double distance) {
  LoadInfoEntry e;
  e.node = node;
  e.load = load;
  e.capacity = capacity;
  e.distance_to_origin = distance;
  return e;
}

}  // namespace

TEST_CASE("default numVS and member bound") {
  CHECK(default_num_vs(1) == 1);
  CHECK(default_num_vs(2) == 1);
  CHECK(default_num_vs(1000) == 10);
  CHECK(default_num_vs(1024) == 10);
  CHECK(default_num_vs(1025) == 11);
  CHECK(nlis_member_bound(4, 2) == 20);
  CHECK(nlis_member_bound(10, 1) == 10);
  CHECK(nlis_member_bound(3, 3) == 39);
}

TEST_CASE("parameter validation and mode names") {
  LBParams p;
  CHECK_NOTHROW(p.validate());
  p.ttl = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = LBParams{};
  p.desired_val = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  for (auto m : {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware, BalanceMode::kDirectory}) {
    CHECK(parse_balance_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_balance_mode("sideways"), std::invalid_argument);
}

TEST_CASE("probe settings per mode") {
  LBParams p;
  auto aware = probe_settings(p, BalanceMode::kTopologyAware, 5, 9);
  CHECK(aware.ttl == 2);
  CHECK(aware.desired_val == 400.0);
  CHECK(aware.fan_out == 5);
  CHECK(aware.nearest_first);
  auto blind = probe_settings(p, BalanceMode::kTopologyUnaware, 5, 9);
  CHECK(std::isinf(blind.desired_val));
  CHECK(blind.fan_out == 5);
  CHECK_FALSE(blind.nearest_first);
}

TEST_CASE("probe respects distance, ttl and origin") {
  auto oracle = line_oracle(24, 10.0);
  auto o = uniform_overlay(24, 4, 2, oracle);
  for (HostId origin = 0; origin < 24; ++origin) {
    ProbeSettings s{1, 1000.0, 4, true, 1};
    auto one = probe_load(o, origin, s, oracle);
    std::set<HostId> direct;
    for (VsId v : o.node(origin).virtual_servers) {
      for (const auto& e : o.vs(v).routing.rows) direct.insert(o.vs(e.target).host);
    }
    for (const auto& e : one.entries) {
      CHECK(direct.count(e.node) == 1);
      CHECK(e.node != origin);
    }
    CHECK(one.entries.size() <= nlis_member_bound(4, 1));

    s.ttl = 2;
    s.desired_val = 55.0;
    auto two = probe_load(o, origin, s, oracle);
    CHECK(two.origin == origin);
    CHECK(two.entries.size() <= nlis_member_bound(4, 2));
    for (std::size_t i = 0; i < two.entries.size(); ++i) {
      const auto& e = two.entries[i];
      CHECK(e.node != origin);
      CHECK(e.distance_to_origin < 55.0);
      CHECK(e.distance_to_origin == oracle.distance(origin, e.node));
      CHECK(e.load == o.node_load(e.node));
      if (i > 0) CHECK(two.entries[i - 1].node < e.node);
    }

    s.desired_val = 1e-9;
    CHECK(probe_load(o, origin, s, oracle).entries.empty());
  }
}

TEST_CASE("probe uses the supplied load snapshot") {
  auto oracle = line_oracle(10, 10.0);
  auto o = uniform_overlay(10, 3, 4, oracle);
  std::vector<double> loads(10);
  for (std::size_t h = 0; h < 10; ++h) loads[h] = 100.0 + static_cast<double>(h);
  auto nlis = probe_load(o, 0, ProbeSettings{2, 1000.0, 3, true, 1}, oracle, loads);
  REQUIRE_FALSE(nlis.entries.empty());
  for (const auto& e : nlis.entries) CHECK(e.load == loads[e.node]);
}

TEST_CASE("neighborhood utilization includes the origin") {
  NLIS n;
  n.entries.push_back(entry(1, 30.0, 30.0, 5.0));
  CHECK(neighborhood_utilization(10.0, 10.0, n) == doctest::Approx(1.0));
  NLIS m;
  double loads = 4.0, caps = 10.0;
  for (int i = 1; i <= 4; ++i) {
    m.entries.push_back(entry(static_cast<HostId>(i), 3.0 * i, 2.0 * i + 1.0, 1.0));
    loads += 3.0 * i;
    caps += 2.0 * i + 1.0;
  }
  CHECK(neighborhood_utilization(4.0, 10.0, m) == doctest::Approx(loads / caps));
  CHECK(neighborhood_utilization(4.0, 10.0, NLIS{}) == doctest::Approx(0.4));
}

TEST_CASE("heavy and light categories") {
  CHECK(categorize(0.0, 10.0, 0.5, 0.05) == NodeCategory::kLight);
  CHECK(categorize(55.0, 100.0, 0.5, 0.05) == NodeCategory::kLight);
  CHECK(categorize(56.0, 100.0, 0.5, 0.05) == NodeCategory::kHeavy);
  CHECK(target_load(0.5, 0.05, 100.0) == doctest::Approx(55.0));
}

TEST_CASE("candidate virtual server") {
  std::vector<double> a{5.0, 9.0, 20.0};
  CHECK(choose_candidate_index(a, 34.0, 27.0) == 1);
  CHECK(choose_candidate_index(a, 34.0, 30.0) == 0);
  CHECK(choose_candidate_index(a, 34.0, 1.0) == 2);
  std::vector<double> b{1.0, 2.0};
  CHECK(choose_candidate_index(b, 13.0, 3.0) == 1);
  std::vector<double> c{4.0};
  CHECK(choose_candidate_index(c, 4.0, 100.0) == 0);
  std::vector<double> tie{3.0, 3.0};
  CHECK(choose_candidate_index(tie, 6.0, 3.0) == 0);
  CHECK_THROWS_AS(choose_candidate_index(std::vector<double>{}, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("light node selection") {
  NLIS empty;
  CHECK_FALSE(find_light_node(1.0, empty, 0.5, 130.0).has_value());

  NLIS one;
  one.entries.push_back(entry(3, 10.0, 100.0, 40.0));
  one.entries.push_back(entry(4, 60.0, 100.0, 20.0));
  CHECK(find_light_node(5.0, one, 0.5, 130.0) == HostId{3});
  CHECK_FALSE(find_light_node(41.0, one, 0.5, 130.0).has_value());

  NLIS n;
  n.entries.push_back(entry(1, 10.0, 100.0, 50.0));
  n.entries.push_back(entry(2, 5.0, 100.0, 150.0));
  n.entries.push_back(entry(3, 50.0, 100.0, 10.0));
  n.entries.push_back(entry(4, 1.0, 100.0, 100.0));
  // 1 -> 2 (close enough, lighter) -> 3 (much closer) -> 4 (close enough, lighter).
  CHECK(find_light_node(5.0, n, 0.8, 130.0) == HostId{4});
  const std::vector<HostId> skip{4};
  CHECK(find_light_node(5.0, n, 0.8, 130.0, skip) == HostId{3});
  // Only 2 and 4 can take 70 below 80.
  CHECK(find_light_node(70.0, n, 0.8, 130.0) == HostId{4});
  const std::vector<HostId> skip4{4};
  CHECK(find_light_node(70.0, n, 0.8, 130.0, skip4) == HostId{2});
  // Load + candidate equal to the target is infeasible.
  CHECK_FALSE(find_light_node(79.0, n, 0.8, 130.0).has_value());
  // An infinite band always prefers utilization.
  CHECK(find_light_node(5.0, n, 0.8, std::numeric_limits<double>::infinity()) == HostId{4});
  // A zero band always prefers distance.
  CHECK(find_light_node(5.0, n, 0.8, 0.0) == HostId{3});
}

TEST_CASE("synch gate") {
  SynchGate gate(3, 0);
  CHECK(gate.request(0, 10.0, 5.0, 20.0) == SynchGate::Reply::kAck);
  CHECK(gate.request(0, 15.0, 5.0, 20.0) == SynchGate::Reply::kReject);
  CHECK(gate.acks(0) == 1);
  SynchGate limited(3, 1);
  CHECK(limited.request(1, 0.0, 1.0, 10.0) == SynchGate::Reply::kAck);
  CHECK(limited.request(1, 0.0, 1.0, 10.0) == SynchGate::Reply::kTimeout);
  CHECK(limited.request(2, 0.0, 1.0, 10.0) == SynchGate::Reply::kAck);
}

TEST_CASE("synchronize and transfer") {
  auto oracle = line_oracle(4, 10.0);
  auto o = uniform_overlay(4, 2, 3, oracle);
  SynchGate gate(4, 0);
  const VsId v = o.node(0).virtual_servers.front();
  SynchGate::Reply reply;
  auto ok = synchronize_and_transfer(o, 0, 2, v, 10.0, gate, oracle, 7, &reply);
  REQUIRE(ok.has_value());
  CHECK(reply == SynchGate::Reply::kAck);
  CHECK(ok->round == 7);
  CHECK(ok->receiver_load_after == doctest::Approx(3.0));
  CHECK(ok->receiver_target == 10.0);
  CHECK(ok->distance == 20.0);
  CHECK(o.vs(v).host == 2);
  const VsId w = o.node(1).virtual_servers.front();
  auto no = synchronize_and_transfer(o, 1, 2, w, 3.5, gate, oracle, 7, &reply);
  CHECK_FALSE(no.has_value());
  CHECK(reply == SynchGate::Reply::kReject);
  CHECK(o.vs(w).host == 1);
}

TEST_CASE("equal utilization gives no transfers") {
  auto oracle = line_oracle(16, 10.0);
  auto o = uniform_overlay(16, 4, 5, oracle);
  LBParams p;
  p.num_vs = 4;
  for (auto mode : {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware, BalanceMode::kDirectory}) {
    Overlay copy = o;
    auto r = run_balancing_round(copy, p, oracle, mode, 1, 3);
    CHECK(r.transfers.empty());
    CHECK(r.heavy_nodes == 0);
    CHECK(count_heavy_nodes(copy, p, oracle, mode, 3) == 0);
  }
}

TEST_CASE("a single heavy node sheds load") {
  auto oracle = line_oracle(16, 10.0);
  Overlay base(Box::unit(2));
  Rng rng(6);
  for (int h = 0; h < 16; ++h) base.add_node(1.0);
  for (HostId h = 0; h < 16; ++h) base.join_node(h, h == 5 ? 40 : 4, rng);
  base.build_routing_tables({FillMode::kTopologyAware, &oracle, 6});
  for (VsId v : base.live_vs()) base.set_load(v, base.vs(v).host == 5 ? 1.0 : 0.0);
  LBParams p;
  p.num_vs = 4;
  for (auto mode : {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware, BalanceMode::kDirectory}) {
    Overlay o = base;
    const double total = o.total_load();
    const double before = o.utilization(5);
    auto r = run_balancing_round(o, p, oracle, mode, 1, 11);
    REQUIRE_FALSE(r.transfers.empty());
    CHECK(r.heavy_nodes == 1);
    CHECK(o.utilization(5) < before);
    CHECK(o.total_load() == doctest::Approx(total));
    CHECK(r.max_util_after <= r.max_util_before);
    for (const auto& t : r.transfers) {
      CHECK(t.source == 5);
      CHECK(t.receiver_load_after < t.receiver_target);
      CHECK(t.distance == oracle.distance(t.source, t.destination));
      if (mode == BalanceMode::kTopologyAware) CHECK(t.distance < p.desired_val);
    }
    CHECK(o.audit().empty());
  }
}

TEST_CASE("rounds on a generated scenario") {
  ExperimentConfig c;
  c.nodes = 256;
  c.rounds = 6;
  c.seed = 4;
  auto s = build_scenario(c);
  for (auto mode : {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware}) {
    auto run = run_mode(s, c, mode);
    REQUIRE(run.rounds.size() == 6);
    double prev = run.rounds.front().max_util_before;
    for (const auto& r : run.rounds) {
      CHECK(r.max_util_before == doctest::Approx(prev));
      CHECK(r.max_util_after <= r.max_util_before + 1e-12);
      CHECK(r.bound_violations == 0);
      prev = r.max_util_after;
    }
    CHECK(run.heavy_after <= run.rounds.front().heavy_nodes);
    CHECK(run.summary_after.max_utilization <= run.summary_before.max_utilization);
    double moved = 0.0;
    for (const auto& t : run.transfers) moved += t.load * t.distance;
    CHECK(run.ltc == doctest::Approx(moved));
  }
}
