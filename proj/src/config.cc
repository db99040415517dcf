#include "raqlb/config.h"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>

namespace raqlb {

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    auto pos = s.find(sep);
    parts.push_back(trim(s.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw std::invalid_argument(fmt::format("{}: cannot parse value '{}'", key, value));
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

int parse_int(std::string_view key, std::string_view value) { return parse_number<int>(key, value); }
double parse_double(std::string_view key, std::string_view value) { return parse_number<double>(key, value); }

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

LatencyRange parse_range(std::string_view key, std::string_view value) {
  auto parts = split(value, ',');
  if (parts.size() != 2) bad_value(key, value);
  return {parse_double(key, parts[0]), parse_double(key, parts[1])};
}

CapacityProfile parse_profile(std::string_view key, std::string_view value) {
  CapacityProfile p;
  for (auto item : split(value, ',')) {
    auto pc = split(item, ':');
    if (pc.size() != 2) bad_value(key, value);
    p.classes.push_back({parse_double(key, pc[0]), parse_double(key, pc[1])});
  }
  return p;
}

template <class F>
auto rethrow_as(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(fmt::format("{}: {}", key, e.what()));
  }
}

std::string join_modes(const std::vector<BalanceMode>& modes) {
  std::string s;
  for (auto m : modes) {
    if (!s.empty()) s += ',';
    s += to_string(m);
  }
  return s;
}

}  // namespace

double ExperimentConfig::resolved_sigma_fraction() const {
  if (sigma_fraction >= 0.0) return sigma_fraction;
  return 0.1 / std::sqrt(static_cast<double>(nodes) * num_vs());
}

void ExperimentConfig::validate() const {
  auto fail = [](std::string_view field, std::string_view why) {
    throw std::invalid_argument(fmt::format("{}: {}", field, why));
  };
  if (nodes < 2) fail("nodes", "must be >= 2");
  if (dims < 1 || dims > 16) fail("dims", "must be in [1, 16]");
  if (rounds < 1) fail("rounds", "must be >= 1");
  if (modes.empty()) fail("modes", "at least one mode required");
  if (!(mu_fraction > 0.0)) fail("load.mu_fraction", "must be positive");
  rethrow_as("lb", [&] { lb.validate(); });
  rethrow_as("topology", [&] { topology.validate(); });
  rethrow_as("embedding", [&] { embedding.validate(); });
  rethrow_as("capacity.profile", [&] { capacity.validate(); });
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "nodes") {
    auto n = parse_number<long long>(key, value);
    if (n < 0) bad_value(key, value);
    c.nodes = static_cast<std::size_t>(n);
  } else if (key == "num_vs" || key == "lb.num_vs") {
    c.lb.num_vs = parse_int(key, value);
  } else if (key == "dims") {
    c.dims = parse_int(key, value);
  } else if (key == "rounds") {
    c.rounds = parse_int(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "output_dir") {
    c.output_dir = std::string(value);
  } else if (key == "overwrite") {
    c.overwrite = parse_bool(key, value);
  } else if (key == "modes") {
    c.modes.clear();
    if (value == "all") {
      c.modes = {BalanceMode::kTopologyAware, BalanceMode::kTopologyUnaware, BalanceMode::kDirectory};
    } else {
      for (auto m : split(value, ',')) c.modes.push_back(rethrow_as(key, [&] { return parse_balance_mode(m); }));
    }
  } else if (key == "oracle") {
    c.oracle = rethrow_as(key, [&] { return parse_oracle_mode(value); });
  } else if (key == "routing.fill") {
    c.routing_fill = rethrow_as(key, [&] { return parse_fill_mode(value); });
  } else if (key == "topology.transit_domains") {
    c.topology.transit_domains = parse_int(key, value);
  } else if (key == "topology.transit_nodes_per_domain") {
    c.topology.transit_nodes_per_domain = parse_int(key, value);
  } else if (key == "topology.stub_domains_per_transit_node") {
    c.topology.stub_domains_per_transit_node = parse_int(key, value);
  } else if (key == "topology.mean_stub_nodes") {
    c.topology.mean_stub_nodes = parse_int(key, value);
  } else if (key == "topology.intra_stub_latency") {
    c.topology.intra_stub = parse_range(key, value);
  } else if (key == "topology.stub_transit_latency") {
    c.topology.stub_transit = parse_range(key, value);
  } else if (key == "topology.transit_transit_latency") {
    c.topology.transit_transit = parse_range(key, value);
  } else if (key == "topology.transit_edge_probability") {
    c.topology.transit_edge_probability = parse_double(key, value);
  } else if (key == "topology.stub_extra_edges_per_node") {
    c.topology.stub_extra_edges_per_node = parse_double(key, value);
  } else if (key == "topology.max_nodes") {
    c.topology.max_nodes = parse_number<std::size_t>(key, value);
  } else if (key == "embedding.dims") {
    c.embedding.dims = parse_int(key, value);
  } else if (key == "embedding.iterations") {
    c.embedding.iterations = parse_int(key, value);
  } else if (key == "embedding.random_peers") {
    c.embedding.random_peers = parse_int(key, value);
  } else if (key == "embedding.near_peers") {
    c.embedding.near_peers = parse_int(key, value);
  } else if (key == "lb.ttl" || key == "ttl") {
    c.lb.ttl = parse_int(key, value);
  } else if (key == "lb.desired_val" || key == "desired_val") {
    c.lb.desired_val = parse_double(key, value);
  } else if (key == "lb.qlb" || key == "qlb") {
    c.lb.qlb = parse_double(key, value);
  } else if (key == "lb.epsilon") {
    c.lb.epsilon = parse_double(key, value);
  } else if (key == "lb.max_transfers_per_round") {
    c.lb.max_transfers_per_round = parse_int(key, value);
  } else if (key == "lb.retry_budget") {
    c.lb.retry_budget = parse_int(key, value);
  } else if (key == "lb.synch_budget") {
    c.lb.synch_budget = parse_int(key, value);
  } else if (key == "load.mu_fraction") {
    c.mu_fraction = parse_double(key, value);
  } else if (key == "load.sigma_fraction") {
    c.sigma_fraction = value == "auto" ? -1.0 : parse_double(key, value);
  } else if (key == "capacity.profile") {
    c.capacity = value == "gnutella" ? CapacityProfile::gnutella() : parse_profile(key, value);
  } else {
    throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
  }
}

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("{}:{}: expected 'key = value'", source, lineno));
    }
    try {
      apply_setting(c, trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("{}:{}: {}", source, lineno, e.what()));
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config file '{}'", path));
  return parse_config(in, path);
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  auto range = [](const LatencyRange& r) { return fmt::format("{},{}", r.lo, r.hi); };
  std::string profile;
  for (const auto& cls : c.capacity.classes) {
    if (!profile.empty()) profile += ',';
    profile += fmt::format("{}:{}", cls.probability, cls.capacity);
  }
  fmt::print(out, "nodes = {}\n", c.nodes);
  fmt::print(out, "num_vs = {}\n", c.lb.num_vs);
  fmt::print(out, "dims = {}\n", c.dims);
  fmt::print(out, "rounds = {}\n", c.rounds);
  fmt::print(out, "seed = {}\n", c.seed);
  fmt::print(out, "output_dir = {}\n", c.output_dir);
  fmt::print(out, "overwrite = {}\n", c.overwrite);
  fmt::print(out, "modes = {}\n", join_modes(c.modes));
  fmt::print(out, "oracle = {}\n", to_string(c.oracle));
  fmt::print(out, "routing.fill = {}\n", to_string(c.routing_fill));
  fmt::print(out, "topology.transit_domains = {}\n", c.topology.transit_domains);
  fmt::print(out, "topology.transit_nodes_per_domain = {}\n", c.topology.transit_nodes_per_domain);
  fmt::print(out, "topology.stub_domains_per_transit_node = {}\n", c.topology.stub_domains_per_transit_node);
  fmt::print(out, "topology.mean_stub_nodes = {}\n", c.topology.mean_stub_nodes);
  fmt::print(out, "topology.intra_stub_latency = {}\n", range(c.topology.intra_stub));
  fmt::print(out, "topology.stub_transit_latency = {}\n", range(c.topology.stub_transit));
  fmt::print(out, "topology.transit_transit_latency = {}\n", range(c.topology.transit_transit));
  fmt::print(out, "topology.transit_edge_probability = {}\n", c.topology.transit_edge_probability);
  fmt::print(out, "topology.stub_extra_edges_per_node = {}\n", c.topology.stub_extra_edges_per_node);
  fmt::print(out, "topology.max_nodes = {}\n", c.topology.max_nodes);
  fmt::print(out, "embedding.dims = {}\n", c.embedding.dims);
  fmt::print(out, "embedding.iterations = {}\n", c.embedding.iterations);
  fmt::print(out, "embedding.random_peers = {}\n", c.embedding.random_peers);
  fmt::print(out, "embedding.near_peers = {}\n", c.embedding.near_peers);
  fmt::print(out, "lb.ttl = {}\n", c.lb.ttl);
  fmt::print(out, "lb.desired_val = {}\n", c.lb.desired_val);
  fmt::print(out, "lb.qlb = {}\n", c.lb.qlb);
  fmt::print(out, "lb.epsilon = {}\n", c.lb.epsilon);
  fmt::print(out, "lb.max_transfers_per_round = {}\n", c.lb.max_transfers_per_round);
  fmt::print(out, "lb.retry_budget = {}\n", c.lb.retry_budget);
  fmt::print(out, "lb.synch_budget = {}\n", c.lb.synch_budget);
  fmt::print(out, "load.mu_fraction = {}\n", c.mu_fraction);
  if (c.sigma_fraction < 0.0) {
    fmt::print(out, "load.sigma_fraction = auto\n");
  } else {
    fmt::print(out, "load.sigma_fraction = {}\n", c.sigma_fraction);
  }
  fmt::print(out, "capacity.profile = {}\n", profile);
}

}  // namespace raqlb
