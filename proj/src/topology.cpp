#include "bee/topology.hpp"

#include <algorithm>
#include <string>

#include "bee/rng.hpp"

namespace bee::net {

namespace {

void check_node(const Topology& topo, NodeId node) {
  if (node < 0 || node >= topo.n)
    throw Error("node " + std::to_string(node) + " out of range for topology of " + std::to_string(topo.n));
}

NodeId tree_parent(NodeId node) { return (node - 1) / 2; }

int depth(NodeId node) {
  int d = 0;
  while (node > 0) {
    node = tree_parent(node);
    ++d;
  }
  return d;
}

Path tree_route(NodeId src, NodeId dst) {
  Path up;
  Path down;
  NodeId a = src;
  NodeId b = dst;
  int da = depth(a);
  int db = depth(b);
  while (da > db) {
    up.push_back(a);
    a = tree_parent(a);
    --da;
  }
  while (db > da) {
    down.push_back(b);
    b = tree_parent(b);
    --db;
  }
  while (a != b) {
    up.push_back(a);
    down.push_back(b);
    a = tree_parent(a);
    b = tree_parent(b);
  }
  up.push_back(a);
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

}  // namespace

bool Topology::has_edge(NodeId x, NodeId y) const {
  return edges.count(Edge{std::min(x, y), std::max(x, y)}) > 0;
}

std::vector<NodeId> Topology::neighbors(NodeId node) const {
  std::vector<NodeId> out;
  for (const auto& e : edges) {
    if (e.a == node) out.push_back(e.b);
    if (e.b == node) out.push_back(e.a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Topology build_topology(TopologyKind kind, int n) {
  if (n <= 0) throw Error("topology needs at least one node, got " + std::to_string(n));
  Topology t;
  t.kind = kind;
  t.n = n;
  switch (kind) {
    case TopologyKind::multicast:
      break;
    case TopologyKind::p2p_star:
      for (NodeId i = 1; i < n; ++i) t.edges.insert({0, i});
      break;
    case TopologyKind::p2p_tree:
      for (NodeId i = 0; i < n; ++i) {
        if (2 * i + 1 < n) t.edges.insert({i, 2 * i + 1});
        if (2 * i + 2 < n) t.edges.insert({i, 2 * i + 2});
      }
      break;
  }
  return t;
}

Path route(const Topology& topo, NodeId src, NodeId dst) {
  check_node(topo, src);
  check_node(topo, dst);
  if (src == dst) return {src};
  switch (topo.kind) {
    case TopologyKind::multicast:
      return {src, dst};
    case TopologyKind::p2p_star:
      if (src == 0 || dst == 0) return {src, dst};
      return {src, 0, dst};
    case TopologyKind::p2p_tree:
      return tree_route(src, dst);
  }
  return {};
}

NodeId next_hop(const Topology& topo, NodeId at, NodeId dst) {
  const auto path = route(topo, at, dst);
  return path.size() > 1 ? path[1] : at;
}

RoutingTable::RoutingTable(const Topology& topo) : n_(topo.n), paths_(static_cast<std::size_t>(topo.n) * topo.n) {
  for (NodeId s = 0; s < n_; ++s) {
    for (NodeId d = 0; d < n_; ++d) paths_[static_cast<std::size_t>(s) * n_ + d] = route(topo, s, d);
  }
}

const Path& RoutingTable::path(NodeId src, NodeId dst) const {
  if (src < 0 || dst < 0 || src >= n_ || dst >= n_) throw Error("routing table lookup out of range");
  return paths_[static_cast<std::size_t>(src) * n_ + dst];
}

std::int64_t CommCost::max_relay_load() const {
  std::int64_t best = 0;
  for (const auto& [node, load] : per_node_relay_load) best = std::max(best, load);
  return best;
}

std::map<NodeId, std::int64_t> CommCost::per_node_transmit() const {
  std::map<NodeId, std::int64_t> out;
  for (const auto& [link, frames] : per_link_frames) out[link.from] += frames;
  return out;
}

CommCost cost_of_trace(const Topology& topo, const Trace& trace) {
  CommCost cost;
  for (NodeId i = 0; i < topo.n; ++i) cost.per_node_relay_load[i] = 0;

  auto unicast = [&](NodeId src, NodeId dst, std::uint64_t bytes) {
    const auto path = route(topo, src, dst);
    const auto hops = static_cast<std::int64_t>(path.size()) - 1;
    cost.messages_on_wire += hops;
    cost.total_hops += hops;
    cost.bytes_on_wire += bytes * static_cast<std::uint64_t>(hops);
    cost.hop_histogram[static_cast<int>(hops)] += 1;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) cost.per_node_relay_load[path[k]] += 1;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) cost.per_link_frames[{path[k], path[k + 1]}] += 1;
  };

  for (const auto& send : trace) {
    check_node(topo, send.src);
    if (send.dst != kBroadcast) check_node(topo, send.dst);

    if (topo.kind == TopologyKind::multicast) {
      const std::int64_t deliveries = topo.n - 1;
      cost.messages_on_wire += deliveries;
      cost.bytes_on_wire += send.bytes * static_cast<std::uint64_t>(deliveries);
      if (send.dst == kBroadcast) {
        cost.total_hops += deliveries;
        cost.hop_histogram[1] += deliveries;
      } else if (send.dst != send.src) {
        cost.total_hops += 1;
        cost.hop_histogram[1] += 1;
      }
      for (NodeId j = 0; j < topo.n; ++j) {
        if (j != send.src) cost.per_link_frames[{kHub, j}] += 1;
      }
      continue;
    }

    if (send.dst == kBroadcast) {
      for (NodeId j = 0; j < topo.n; ++j) {
        if (j != send.src) unicast(send.src, j, send.bytes);
      }
    } else {
      unicast(send.src, send.dst, send.bytes);
    }
  }
  return cost;
}

Trace uniform_pairs(int n, int count, std::uint64_t seed, std::uint64_t bytes) {
  if (n < 2) throw Error("uniform_pairs needs at least two nodes");
  Rng rng(seed);
  Trace t;
  t.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto src = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    auto dst = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (dst >= src) ++dst;
    t.push_back({src, dst, bytes});
  }
  return t;
}

Trace all_pairs(int n, std::uint64_t bytes) {
  Trace t;
  for (NodeId s = 0; s < n; ++s) {
    for (NodeId d = 0; d < n; ++d) {
      if (s != d) t.push_back({s, d, bytes});
    }
  }
  return t;
}

Trace pattern_trace(const CommPattern& pattern, int n, int sends_per_process, std::uint64_t bytes,
                    std::uint64_t seed) {
  Trace t;
  if (n < 2) return t;
  Rng rng(seed);
  const double p2p_share = pattern.one_to_one_fraction();
  for (int round = 0; round < sends_per_process; ++round) {
    for (NodeId src = 0; src < n; ++src) {
      if (rng.chance(p2p_share)) {
        auto dst = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n - 1)));
        if (dst >= src) ++dst;
        t.push_back({src, dst, bytes});
      } else {
        t.push_back({src, kBroadcast, bytes});
      }
    }
  }
  return t;
}

}  // namespace bee::net
