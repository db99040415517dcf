#include "raqlb/overlay.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "raqlb/random.h"

namespace raqlb {

// ---------------------------------------------------------------------------
// Plane equations and boxes

std::size_t PlaneEquation::matched_prefix(std::span<const double> point) const {
  std::size_t m = 0;
  while (m < labels.size() && labels[m].admits(point)) ++m;
  return m;
}

std::size_t PlaneEquation::common_prefix(const PlaneEquation& other) const {
  std::size_t m = 0;
  auto n = std::min(labels.size(), other.labels.size());
  while (m < n && labels[m] == other.labels[m]) ++m;
  return m;
}

std::string PlaneEquation::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ',';
    out += fmt::format("(x{}={},{})", labels[i].dim, labels[i].threshold, labels[i].side == Side::kPlus ? '+' : '-');
  }
  return out + "]";
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < lo.size(); ++k) v *= hi[k] - lo[k];
  return v;
}

bool Box::contains(std::span<const double> point) const {
  if (point.size() != lo.size()) return false;
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (point[k] < lo[k] || point[k] >= hi[k]) return false;
  }
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(lo.size());
  for (std::size_t k = 0; k < lo.size(); ++k) c[k] = 0.5 * (lo[k] + hi[k]);
  return c;
}

bool Box::overlaps(const Box& other) const {
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (hi[k] <= other.lo[k] || other.hi[k] <= lo[k]) return false;
  }
  return true;
}

Box Box::unit(int dims) {
  if (dims < 1) throw std::invalid_argument("box: dims must be >= 1");
  return Box{std::vector<double>(static_cast<std::size_t>(dims), 0.0),
             std::vector<double>(static_cast<std::size_t>(dims), 1.0)};
}

std::size_t RoutingTable::entry_count() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const RoutingEntry& e) { return e.target != kNoVs; }));
}

FillMode parse_fill_mode(std::string_view name) {
  if (name == "aware") return FillMode::kTopologyAware;
  if (name == "unaware") return FillMode::kTopologyUnaware;
  throw std::invalid_argument(fmt::format("unknown routing fill mode '{}'", name));
}

std::string_view to_string(FillMode mode) {
  return mode == FillMode::kTopologyAware ? "aware" : "unaware";
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction and bookkeeping

Overlay::Overlay(Box space) : space_(std::move(space)) {
  if (space_.dims() == 0 || space_.hi.size() != space_.dims()) {
    throw std::invalid_argument("overlay: malformed search space");
  }
  for (std::size_t k = 0; k < space_.dims(); ++k) {
    if (!(space_.lo[k] < space_.hi[k])) throw std::invalid_argument("overlay: empty search space");
  }
}

HostId Overlay::add_node(double capacity, UnderlayId attachment) {
  if (!(capacity > 0.0)) throw std::invalid_argument("overlay: node capacity must be positive");
  PhysicalNode n;
  n.id = static_cast<HostId>(nodes_.size());
  n.capacity = capacity;
  n.attachment = attachment;
  nodes_.push_back(std::move(n));
  heavy_marked_.push_back(0);
  return nodes_.back().id;
}

void Overlay::set_capacity(HostId h, double capacity) {
  if (!(capacity > 0.0)) throw std::invalid_argument("overlay: node capacity must be positive");
  nodes_.at(h).capacity = capacity;
}

double Overlay::node_load(HostId h) const {
  double sum = 0.0;
  for (VsId v : nodes_.at(h).virtual_servers) sum += servers_[v].load;
  return sum;
}

double Overlay::total_load() const {
  double sum = 0.0;
  for (const auto& s : servers_) {
    if (s.alive) sum += s.load;
  }
  return sum;
}

std::vector<VsId> Overlay::live_vs() const {
  std::vector<VsId> out;
  out.reserve(live_count_);
  for (const auto& s : servers_) {
    if (s.alive) out.push_back(s.id);
  }
  return out;
}

const Box& Overlay::region(VsId id) const {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  return tree_[static_cast<std::size_t>(servers_[id].tree_node)].region;
}

double Overlay::total_fraction() const {
  double sum = 0.0;
  for (const auto& s : servers_) {
    if (s.alive) sum += fraction(s.id);
  }
  return sum;
}

void Overlay::set_load(VsId id, double load) {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  if (!(load >= 0.0)) throw std::invalid_argument("overlay: load must be non-negative");
  servers_[id].load = load;
}

VsId Overlay::new_vs(HostId host, std::vector<double> point, int tree_node) {
  VirtualServer s;
  s.id = static_cast<VsId>(servers_.size());
  s.point = std::move(point);
  s.host = host;
  s.alive = true;
  s.tree_node = tree_node;
  servers_.push_back(std::move(s));
  ref_count_.push_back(0);
  ++live_count_;
  attach_to_host(servers_.back().id, host);
  return servers_.back().id;
}

int Overlay::new_tree_node(int parent, Box region, int depth) {
  TreeNode t;
  t.parent = parent;
  t.region = std::move(region);
  t.depth = depth;
  tree_.push_back(std::move(t));
  return static_cast<int>(tree_.size()) - 1;
}

void Overlay::attach_to_host(VsId id, HostId host) {
  auto& list = nodes_.at(host).virtual_servers;
  list.insert(std::lower_bound(list.begin(), list.end(), id), id);
  servers_[id].host = host;
}

void Overlay::detach_from_host(VsId id) {
  auto& list = nodes_.at(servers_[id].host).virtual_servers;
  auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it != list.end() && *it == id) list.erase(it);
}

std::vector<int> Overlay::path_to(VsId id) const {
  std::vector<int> path;
  for (int t = servers_[id].tree_node; t >= 0; t = tree_[static_cast<std::size_t>(t)].parent) path.push_back(t);
  std::reverse(path.begin(), path.end());
  return path;
}

void Overlay::collect_leaves(int tree_node, std::vector<VsId>& out) const {
  std::vector<int> stack{tree_node};
  while (!stack.empty()) {
    const auto& t = tree_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (t.is_leaf()) {
      out.push_back(t.vs);
    } else {
      stack.push_back(t.child[1]);
      stack.push_back(t.child[0]);
    }
  }
}

// ---------------------------------------------------------------------------
// Joins and departures

std::vector<VsId> Overlay::join_node(HostId host, int num_vs, Rng& rng) {
  if (num_vs < 1) throw std::invalid_argument("overlay: numVS must be >= 1");
  if (host >= nodes_.size()) throw std::out_of_range("overlay: unknown host");
  std::vector<VsId> joined;
  std::vector<double> point(dims());
  while (static_cast<int>(joined.size()) < num_vs) {
    for (std::size_t k = 0; k < dims(); ++k) point[k] = rng.uniform(space_.lo[k], space_.hi[k]);
    if (root_ >= 0) {
      // A sample landing exactly on an existing sample point cannot split.
      const auto& occupant = servers_[locate(point)];
      if (occupant.point == point) continue;
    }
    joined.push_back(join_at(host, point));
  }
  return joined;
}

VsId Overlay::join_at(HostId host, std::span<const double> point) {
  if (host >= nodes_.size()) throw std::out_of_range("overlay: unknown host");
  if (!space_.contains(point)) throw std::invalid_argument("overlay: join point outside the search space");
  std::vector<double> p(point.begin(), point.end());
  if (root_ < 0) {
    root_ = new_tree_node(-1, space_, 0);
    VsId id = new_vs(host, std::move(p), root_);
    tree_[static_cast<std::size_t>(root_)].vs = id;
    return id;
  }
  const VsId occupant = locate(point);
  const auto& q = servers_[occupant].point;
  std::size_t dim = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < dims(); ++k) {
    double gap = std::abs(q[k] - p[k]);
    if (gap > best) {
      best = gap;
      dim = k;
    }
  }
  if (best <= 0.0) throw std::invalid_argument("overlay: join point coincides with an existing sample point");
  const double threshold = 0.5 * (q[dim] + p[dim]);
  const Side new_side = p[dim] >= threshold ? Side::kPlus : Side::kMinus;
  if ((q[dim] >= threshold) == (new_side == Side::kPlus)) {
    throw std::invalid_argument("overlay: sample points too close to separate");
  }
  VsId id = split(occupant, static_cast<std::uint16_t>(dim), threshold, new_side, host);
  servers_[id].point = std::move(p);
  return id;
}

VsId Overlay::split(VsId occupant, std::uint16_t dim, double threshold, Side new_side, HostId host) {
  if (!alive(occupant)) throw std::out_of_range("overlay: unknown virtual server");
  if (host >= nodes_.size()) throw std::out_of_range("overlay: unknown host");
  if (dim >= dims()) throw std::invalid_argument("overlay: split dimension out of range");
  const int leaf = servers_[occupant].tree_node;
  {
    const Box& r = tree_[static_cast<std::size_t>(leaf)].region;
    if (!(r.lo[dim] < threshold && threshold < r.hi[dim])) {
      throw std::invalid_argument("overlay: split threshold outside the leaf region");
    }
  }
  Box minus = tree_[static_cast<std::size_t>(leaf)].region;
  Box plus = minus;
  minus.hi[dim] = threshold;
  plus.lo[dim] = threshold;
  const int depth = tree_[static_cast<std::size_t>(leaf)].depth + 1;
  const int minus_node = new_tree_node(leaf, std::move(minus), depth);
  const int plus_node = new_tree_node(leaf, std::move(plus), depth);
  auto& parent = tree_[static_cast<std::size_t>(leaf)];
  parent.child[0] = minus_node;
  parent.child[1] = plus_node;
  parent.dim = dim;
  parent.threshold = threshold;
  parent.vs = kNoVs;

  const int new_node = new_side == Side::kPlus ? plus_node : minus_node;
  const int old_node = new_side == Side::kPlus ? minus_node : plus_node;
  const VsId id = new_vs(host, tree_[static_cast<std::size_t>(new_node)].region.center(), new_node);
  tree_[static_cast<std::size_t>(new_node)].vs = id;
  tree_[static_cast<std::size_t>(old_node)].vs = occupant;

  auto& old = servers_[occupant];
  old.tree_node = old_node;
  servers_[id].pe = old.pe;
  old.pe.labels.push_back({dim, threshold, opposite(new_side)});
  servers_[id].pe.labels.push_back({dim, threshold, new_side});
  if (!tree_[static_cast<std::size_t>(old_node)].region.contains(old.point)) {
    old.point = tree_[static_cast<std::size_t>(old_node)].region.center();
  }

  if (routing_enabled_) {
    servers_[occupant].routing.rows.emplace_back();
    set_entry(occupant, servers_[occupant].routing.rows.size() - 1, id);
    refill_table(id);
  }
  return id;
}

DepartureResult Overlay::depart_virtual_server(VsId id) {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  if (live_count_ < 2) throw std::logic_error("overlay: cannot depart the last virtual server");

  const int leaf = servers_[id].tree_node;
  const int parent = tree_[static_cast<std::size_t>(leaf)].parent;
  const auto& p = tree_[static_cast<std::size_t>(parent)];
  const int sibling = p.child[0] == leaf ? p.child[1] : p.child[0];

  // Collapses internal node `t` (two leaf children) into a leaf owned by
  // `keeper`, which inherits the other child's load.
  auto collapse = [&](int t, VsId keeper, VsId absorbed) {
    auto& node = tree_[static_cast<std::size_t>(t)];
    node.child[0] = node.child[1] = -1;
    node.vs = keeper;
    auto& k = servers_[keeper];
    k.tree_node = t;
    k.pe.labels.pop_back();
    k.load += servers_[absorbed].load;
    if (routing_enabled_) pop_row(keeper);
  };
  auto kill = [&](VsId v) {
    if (routing_enabled_) clear_table(v);
    detach_from_host(v);
    servers_[v].alive = false;
    --live_count_;
  };

  DepartureResult result;
  if (tree_[static_cast<std::size_t>(sibling)].is_leaf()) {
    const VsId keeper = tree_[static_cast<std::size_t>(sibling)].vs;
    kill(id);
    collapse(parent, keeper, id);
    result.absorber = keeper;
  } else {
    // Deepest internal node with two leaf children inside the sibling
    // subtree; ties go to the lowest tree index.
    int pair = -1;
    std::vector<int> stack{sibling};
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      const auto& n = tree_[static_cast<std::size_t>(t)];
      if (n.is_leaf()) continue;
      if (tree_[static_cast<std::size_t>(n.child[0])].is_leaf() &&
          tree_[static_cast<std::size_t>(n.child[1])].is_leaf()) {
        if (pair < 0 || n.depth > tree_[static_cast<std::size_t>(pair)].depth ||
            (n.depth == tree_[static_cast<std::size_t>(pair)].depth && t < pair)) {
          pair = t;
        }
      }
      stack.push_back(n.child[0]);
      stack.push_back(n.child[1]);
    }
    const VsId stays = tree_[static_cast<std::size_t>(tree_[static_cast<std::size_t>(pair)].child[0])].vs;
    const VsId moves = tree_[static_cast<std::size_t>(tree_[static_cast<std::size_t>(pair)].child[1])].vs;
    const double departed_load = servers_[id].load;
    collapse(pair, stays, moves);

    auto& m = servers_[moves];
    m.tree_node = leaf;
    m.pe = servers_[id].pe;
    m.point = servers_[id].point;
    m.load = departed_load;
    tree_[static_cast<std::size_t>(leaf)].vs = moves;
    kill(id);
    if (routing_enabled_) {
      refill_table(moves);
      for (auto [owner, row] : referrers(moves)) {
        if (owner != moves) refill_row(owner, row);
      }
    }
    result.absorber = moves;
    result.merged_into = stays;
  }
  if (routing_enabled_) {
    for (auto [owner, row] : referrers(id)) refill_row(owner, row);
  }
  return result;
}

TransferRecord Overlay::transfer_virtual_server(VsId id, HostId from, HostId to, const DistanceOracle& oracle) {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  if (servers_[id].host != from) throw std::invalid_argument("overlay: source node does not host the virtual server");
  if (to >= nodes_.size()) throw std::out_of_range("overlay: unknown destination node");
  if (to == from) throw std::invalid_argument("overlay: transfer source and destination are the same node");

  detach_from_host(id);
  attach_to_host(id, to);
  nodes_[from].in_degree -= ref_count_[id];
  nodes_[to].in_degree += ref_count_[id];
  // The server re-joins at its new host, so its own links are re-selected
  // from there.
  if (routing_enabled_) refill_table(id);

  TransferRecord record;
  record.load = servers_[id].load;
  record.source = from;
  record.destination = to;
  record.distance = oracle.distance(from, to);
  record.vs = id;
  return record;
}

// ---------------------------------------------------------------------------
// Lookup and routing

VsId Overlay::locate(std::span<const double> point) const {
  if (root_ < 0) throw std::logic_error("overlay: empty overlay");
  if (!space_.contains(point)) throw std::invalid_argument("overlay: point outside the search space");
  int t = root_;
  while (!tree_[static_cast<std::size_t>(t)].is_leaf()) {
    const auto& n = tree_[static_cast<std::size_t>(t)];
    t = n.child[point[n.dim] >= n.threshold ? 1 : 0];
  }
  return tree_[static_cast<std::size_t>(t)].vs;
}

std::vector<VsId> Overlay::route_query(VsId origin, std::span<const double> target) const {
  if (!alive(origin)) throw std::out_of_range("overlay: unknown virtual server");
  if (!space_.contains(target)) throw std::invalid_argument("overlay: target outside the search space");
  std::vector<VsId> path{origin};
  VsId current = origin;
  // Progress is strictly lexicographic in (matched prefix, -distance), so
  // the loop cannot revisit a server; the bound is a guard only.
  for (std::size_t step = 0; step <= live_count_; ++step) {
    const auto& cur = servers_[current];
    std::size_t best_match = cur.pe.matched_prefix(target);
    if (best_match == cur.pe.depth()) return path;
    double best_dist = squared_distance(target, region(current).center());
    VsId best = kNoVs;
    for (const auto& entry : cur.routing.rows) {
      if (entry.target == kNoVs || !alive(entry.target)) continue;
      const auto& cand = servers_[entry.target];
      std::size_t match = cand.pe.matched_prefix(target);
      double dist = squared_distance(target, region(entry.target).center());
      if (match > best_match || (match == best_match && dist < best_dist)) {
        best = entry.target;
        best_match = match;
        best_dist = dist;
      }
    }
    if (best == kNoVs) return path;
    current = best;
    path.push_back(current);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Routing tables

std::vector<VsId> Overlay::row_candidates(VsId id, std::size_t row) const {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  const auto path = path_to(id);
  if (row + 1 >= path.size()) throw std::out_of_range("overlay: routing row beyond PE depth");
  const auto& ancestor = tree_[static_cast<std::size_t>(path[row])];
  const int sibling = ancestor.child[0] == path[row + 1] ? ancestor.child[1] : ancestor.child[0];
  std::vector<VsId> out;
  collect_leaves(sibling, out);
  return out;
}

std::vector<VsId> Overlay::filtered_candidates(VsId owner, std::size_t row, bool allow_fallback) const {
  const auto all = row_candidates(owner, row);
  const HostId own_host = servers_[owner].host;
  // Preference tiers: other hosts that are not heavy-marked, then co-hosted
  // servers that are not marked; with fallback, marked hosts are allowed.
  const int worst = allow_fallback ? 3 : 1;
  int best = worst + 1;
  std::vector<VsId> tier;
  for (VsId c : all) {
    const HostId h = servers_[c].host;
    const int t = (heavy_marked(h) ? 2 : 0) + (h == own_host ? 1 : 0);
    if (t > worst || t > best) continue;
    if (t < best) {
      best = t;
      tier.clear();
    }
    tier.push_back(c);
  }
  return tier;
}

VsId Overlay::select_candidate(VsId owner, std::size_t row, std::span<const VsId> candidates,
                               const RoutingPolicy& policy) const {
  if (candidates.empty()) return kNoVs;
  if (policy.mode == FillMode::kTopologyAware) {
    if (policy.oracle == nullptr) throw std::logic_error("overlay: topology-aware fill requires a distance oracle");
    const HostId from = servers_[owner].host;
    VsId best = candidates[0];
    double best_d = policy.oracle->distance(from, servers_[best].host);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      double d = policy.oracle->distance(from, servers_[candidates[i]].host);
      if (d < best_d || (d == best_d && candidates[i] < best)) {
        best = candidates[i];
        best_d = d;
      }
    }
    return best;
  }
  // Uniform pick of the k-th smallest id, so candidate order does not matter.
  Rng rng(derive_seed(policy.seed, owner, row));
  const auto k = static_cast<std::ptrdiff_t>(rng.below(candidates.size()));
  std::vector<VsId> ids(candidates.begin(), candidates.end());
  std::nth_element(ids.begin(), ids.begin() + k, ids.end());
  return ids[static_cast<std::size_t>(k)];
}

RoutingTable Overlay::compute_routing_table(VsId id, const RoutingPolicy& policy) const {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  RoutingTable table;
  table.rows.resize(servers_[id].pe.depth());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    auto cands = filtered_candidates(id, r, true);
    table.rows[r].target = select_candidate(id, r, cands, policy);
  }
  return table;
}

RoutingTable fill_routing_table(const Overlay& overlay, VsId id, const RoutingPolicy& policy) {
  return overlay.compute_routing_table(id, policy);
}

void Overlay::install_routing_table(VsId id, RoutingTable table) {
  if (!alive(id)) throw std::out_of_range("overlay: unknown virtual server");
  if (table.rows.size() != servers_[id].pe.depth()) {
    throw std::invalid_argument("overlay: routing table row count must equal PE depth");
  }
  clear_table(id);
  servers_[id].routing.rows.resize(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    set_entry(id, r, table.rows[r].target);
    servers_[id].routing.rows[r].marked = table.rows[r].marked;
  }
}

void Overlay::build_routing_tables(const RoutingPolicy& policy) {
  if (policy.mode == FillMode::kTopologyAware && policy.oracle == nullptr) {
    throw std::logic_error("overlay: topology-aware fill requires a distance oracle");
  }
  policy_ = policy;
  routing_enabled_ = true;
  for (const auto& s : servers_) {
    if (s.alive) refill_table(s.id);
  }
}

void Overlay::set_entry(VsId owner, std::size_t row, VsId target) {
  auto& entry = servers_[owner].routing.rows[row];
  if (entry.target != kNoVs) {
    --ref_count_[entry.target];
    --nodes_[servers_[entry.target].host].in_degree;
  }
  entry.target = target;
  entry.marked = false;
  if (target != kNoVs) {
    ++ref_count_[target];
    ++nodes_[servers_[target].host].in_degree;
  }
}

void Overlay::clear_table(VsId owner) {
  auto& rows = servers_[owner].routing.rows;
  for (std::size_t r = 0; r < rows.size(); ++r) set_entry(owner, r, kNoVs);
  rows.clear();
}

void Overlay::pop_row(VsId owner) {
  auto& rows = servers_[owner].routing.rows;
  if (rows.empty()) return;
  set_entry(owner, rows.size() - 1, kNoVs);
  rows.pop_back();
}

void Overlay::refill_row(VsId owner, std::size_t row) {
  auto cands = filtered_candidates(owner, row, true);
  set_entry(owner, row, select_candidate(owner, row, cands, policy_));
}

void Overlay::refill_table(VsId owner) {
  clear_table(owner);
  servers_[owner].routing.rows.resize(servers_[owner].pe.depth());
  for (std::size_t r = 0; r < servers_[owner].routing.rows.size(); ++r) refill_row(owner, r);
}

std::vector<std::pair<VsId, std::size_t>> Overlay::referrers(VsId target) const {
  std::vector<std::pair<VsId, std::size_t>> out;
  if (ref_count_.at(target) == 0) return out;
  for (const auto& s : servers_) {
    if (!s.alive) continue;
    for (std::size_t r = 0; r < s.routing.rows.size(); ++r) {
      if (s.routing.rows[r].target == target) out.emplace_back(s.id, r);
    }
  }
  return out;
}

std::size_t Overlay::handle_heavy_load(HostId host) {
  if (host >= nodes_.size()) throw std::out_of_range("overlay: unknown host");
  heavy_marked_[host] = 1;
  std::vector<std::pair<VsId, std::size_t>> marked;
  for (auto& s : servers_) {
    if (!s.alive) continue;
    for (std::size_t r = 0; r < s.routing.rows.size(); ++r) {
      auto& entry = s.routing.rows[r];
      if (entry.target != kNoVs && servers_[entry.target].host == host) {
        entry.marked = true;
        marked.emplace_back(s.id, r);
      }
    }
  }
  std::size_t replaced = 0;
  for (auto [owner, row] : marked) {
    auto cands = filtered_candidates(owner, row, false);
    if (cands.empty()) continue;  // no alternative: keep the marked entry
    set_entry(owner, row, select_candidate(owner, row, cands, policy_));
    ++replaced;
  }
  return replaced;
}

std::vector<std::size_t> Overlay::recount_in_degrees() const {
  std::vector<std::size_t> counts(nodes_.size(), 0);
  for (const auto& s : servers_) {
    if (!s.alive) continue;
    for (const auto& e : s.routing.rows) {
      if (e.target != kNoVs) ++counts[servers_[e.target].host];
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Audit and snapshot

std::vector<std::string> Overlay::audit() const {
  std::vector<std::string> problems;
  auto report = [&](std::string msg) { problems.push_back(std::move(msg)); };

  if (live_count_ > 0 && std::abs(total_fraction() - 1.0) > 1e-9) {
    report(fmt::format("space fractions sum to {}", total_fraction()));
  }
  std::vector<VsId> live = live_vs();
  std::vector<std::size_t> refs(servers_.size(), 0);
  for (VsId id : live) {
    const auto& s = servers_[id];
    const auto& t = tree_[static_cast<std::size_t>(s.tree_node)];
    if (!t.is_leaf() || t.vs != id) report(fmt::format("vs {} tree linkage broken", id));
    if (static_cast<std::size_t>(t.depth) != s.pe.depth()) report(fmt::format("vs {} PE length != depth", id));
    Box from_pe = space_;
    for (const auto& l : s.pe.labels) {
      if (l.side == Side::kPlus) {
        from_pe.lo[l.dim] = std::max(from_pe.lo[l.dim], l.threshold);
      } else {
        from_pe.hi[l.dim] = std::min(from_pe.hi[l.dim], l.threshold);
      }
    }
    if (!(from_pe == t.region)) report(fmt::format("vs {} PE does not reproduce its region", id));
    if (!t.region.contains(s.point)) report(fmt::format("vs {} sample point outside region", id));
    const auto& hosted = nodes_.at(s.host).virtual_servers;
    if (!std::binary_search(hosted.begin(), hosted.end(), id)) report(fmt::format("vs {} missing from host list", id));
    if (routing_enabled_) {
      if (s.routing.rows.size() != s.pe.depth()) report(fmt::format("vs {} row count != PE depth", id));
      for (std::size_t r = 0; r < s.routing.rows.size(); ++r) {
        VsId target = s.routing.rows[r].target;
        if (target == kNoVs || !alive(target)) {
          report(fmt::format("vs {} row {} has no live target", id, r));
          continue;
        }
        ++refs[target];
        const auto& tp = servers_[target].pe;
        Label flipped = s.pe.labels[r];
        flipped.side = opposite(flipped.side);
        if (tp.depth() <= r || s.pe.common_prefix(tp) < r || !(tp.labels[r] == flipped)) {
          report(fmt::format("vs {} row {} violates the connection rule", id, r));
        }
      }
    }
  }
  for (std::size_t a = 0; a < live.size(); ++a) {
    for (std::size_t b = a + 1; b < live.size(); ++b) {
      if (region(live[a]).overlaps(region(live[b]))) report(fmt::format("vs {} and {} overlap", live[a], live[b]));
    }
  }
  for (const auto& n : nodes_) {
    for (VsId v : n.virtual_servers) {
      if (!alive(v) || servers_[v].host != n.id) report(fmt::format("node {} lists stale vs {}", n.id, v));
    }
  }
  for (VsId id : live) {
    if (refs[id] != ref_count_[id]) report(fmt::format("vs {} reference count drifted", id));
  }
  auto recount = recount_in_degrees();
  for (const auto& n : nodes_) {
    if (recount[n.id] != n.in_degree) {
      report(fmt::format("node {} in-degree {} != recount {}", n.id, n.in_degree, recount[n.id]));
    }
  }
  return problems;
}

void Overlay::write_snapshot(std::ostream& out) const {
  out << fmt::format("# overlay dims={} vs={} nodes={}\n", dims(), live_count_, nodes_.size());
  for (const auto& s : servers_) {
    if (!s.alive) continue;
    std::string pe;
    for (const auto& l : s.pe.labels) {
      if (!pe.empty()) pe += ',';
      pe += fmt::format("{}:{}:{}", l.dim, l.threshold, l.side == Side::kPlus ? '+' : '-');
    }
    if (pe.empty()) pe = "-";
    out << fmt::format("{} {} {} {} {}\n", s.id, s.host, pe, fraction(s.id), s.load);
  }
}

InDegreeHistogram in_degree_histogram(const Overlay& overlay) {
  InDegreeHistogram h;
  const std::size_t n = overlay.node_count();
  h.per_node.resize(n);
  std::map<std::size_t, std::size_t> counts;
  double sum = 0.0;
  for (HostId i = 0; i < n; ++i) {
    h.per_node[i] = overlay.node(i).in_degree;
    ++counts[h.per_node[i]];
    sum += static_cast<double>(h.per_node[i]);
    h.max = std::max(h.max, h.per_node[i]);
  }
  if (n == 0) return h;
  h.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (auto d : h.per_node) sq += (static_cast<double>(d) - h.mean) * (static_cast<double>(d) - h.mean);
  h.variance = sq / static_cast<double>(n);
  std::size_t cumulative = 0;
  for (auto [degree, count] : counts) {
    cumulative += count;
    h.cdf.emplace_back(degree, static_cast<double>(cumulative) / static_cast<double>(n));
  }
  return h;
}

}  // namespace raqlb
