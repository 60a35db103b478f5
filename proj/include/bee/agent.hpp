#pragma once

// Node agent for the local-process backend. One agent process stands in for
// one VM: it owns a control channel (the SSH-forwarded vNIC) and an MPI-plane
// channel where it relays frames store-and-forward along the overlay
// topology. A multicast topology is realised by a hub process that copies
// every frame to all other connected agents.
//
// Control protocol: one JSON object per line, one reply line per request.
//   {"cmd":"status"}                         -> {"ok":true,"node":i,"links":[...]}
//   {"cmd":"send","dst":d,"payload":"<hex>"} -> {"ok":true} | {"ok":false,"error":..,"relay":r}
//   {"cmd":"stats"}                          -> {"ok":true,"rx":{"<from>":n},"delivered":[..],"failures":[..]}
//   {"cmd":"reset_stats"}
//   {"cmd":"exec","argv":[..]}               container-layer tag operations
//   {"cmd":"put_volume","path":p}            load a volume into the node
//   {"cmd":"start_app","start_ticks":s,"total_ticks":t,"ticks_per_second":r,"delay_s":d}
//   {"cmd":"progress"}                       -> {"ok":true,"ticks":k}
//   {"cmd":"pause"} / {"cmd":"resume"}
//   {"cmd":"snapshot","path":p}              -> {"ok":true,"digest":..,"ticks":k}
//   {"cmd":"stop"}                           reply, then exit

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bee/json_io.hpp"
#include "bee/topology.hpp"

namespace bee::net {

struct NodePorts {
  NodeId id = 0;
  std::uint16_t mpi_port = 0;
  std::uint16_t control_port = 0;

  bool operator==(const NodePorts&) const = default;
};

struct AddressMap {
  std::vector<NodePorts> nodes;
  std::optional<std::uint16_t> hub_port;

  const NodePorts& at(NodeId id) const;
  bool operator==(const AddressMap&) const = default;
};

void to_json(json& j, const NodePorts& p);
void from_json(const json& j, NodePorts& p);
void to_json(json& j, const AddressMap& m);
void from_json(const json& j, AddressMap& m);
void to_json(json& j, const Topology& t);
void from_json(const json& j, Topology& t);

struct AgentOptions {
  NodeId node = 0;
  Topology topology;
  AddressMap addresses;
  std::filesystem::path workdir;
};

/// Runs until a stop command arrives. Returns the process exit code.
int run_agent(const AgentOptions& options);

/// Runs the multicast hub until killed.
int run_hub(const AddressMap& addresses);

}  // namespace bee::net
