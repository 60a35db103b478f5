#pragma once

// Overlay topologies for the MPI plane: a multicast subnet, a star centred
// on the master and a binary heap tree rooted at the master. Node 0 is
// always the master.

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "bee/model.hpp"

namespace bee::net {

using NodeId = int;
using TopologyKind = NetworkSolution;

/// Destination meaning "every other node".
inline constexpr NodeId kBroadcast = -1;
/// Wire id of the multicast hub.
inline constexpr NodeId kHub = 0xFFFF;

struct Edge {
  NodeId a = 0;  // a < b
  NodeId b = 0;

  auto operator<=>(const Edge&) const = default;
};

struct Link {
  NodeId from = 0;
  NodeId to = 0;

  auto operator<=>(const Link&) const = default;
};

struct Topology {
  TopologyKind kind = TopologyKind::p2p_tree;
  int n = 1;
  std::set<Edge> edges;

  bool has_edge(NodeId x, NodeId y) const;
  std::vector<NodeId> neighbors(NodeId node) const;
  bool operator==(const Topology&) const = default;
};

using Path = std::vector<NodeId>;

Topology build_topology(TopologyKind kind, int n);

/// Multicast gives [src, dst]; star goes through 0; tree goes through the
/// lowest common ancestor.
Path route(const Topology& topo, NodeId src, NodeId dst);

/// Next node after `at` on the way to `dst`.
NodeId next_hop(const Topology& topo, NodeId at, NodeId dst);

class RoutingTable {
 public:
  explicit RoutingTable(const Topology& topo);

  const Path& path(NodeId src, NodeId dst) const;
  int n() const { return n_; }

 private:
  int n_;
  std::vector<Path> paths_;
};

struct Send {
  NodeId src = 0;
  NodeId dst = 0;  // or kBroadcast
  std::uint64_t bytes = 0;

  bool operator==(const Send&) const = default;
};

using Trace = std::vector<Send>;

struct CommCost {
  std::int64_t messages_on_wire = 0;
  std::int64_t total_hops = 0;
  std::uint64_t bytes_on_wire = 0;
  std::map<NodeId, std::int64_t> per_node_relay_load;  // every node, zeros included
  std::map<Link, std::int64_t> per_link_frames;        // frames received over each directed link
  std::map<int, std::int64_t> hop_histogram;           // hops per unicast delivery -> count

  std::int64_t max_relay_load() const;
  /// Frames each node puts on the wire (sends plus relays).
  std::map<NodeId, std::int64_t> per_node_transmit() const;
};

/// Multicast: every send is n-1 deliveries regardless of destination.
/// P2P: every unicast costs len(path)-1 hop transmissions, a broadcast is
/// sent as n-1 unicasts.
CommCost cost_of_trace(const Topology& topo, const Trace& trace);

Trace uniform_pairs(int n, int count, std::uint64_t seed, std::uint64_t bytes = 1);
Trace all_pairs(int n, std::uint64_t bytes = 1);

/// Synthetic trace for a communication pattern: each process issues
/// `sends_per_process` logical sends, a share of which are broadcasts.
Trace pattern_trace(const CommPattern& pattern, int n, int sends_per_process, std::uint64_t bytes,
                    std::uint64_t seed);

}  // namespace bee::net
