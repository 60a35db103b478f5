#pragma once

// Launches one agent process per overlay node (plus the hub for multicast)
// and drives them over their control channels.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bee/agent.hpp"
#include "bee/socket.hpp"

namespace bee::net {

/// Path of the bee-agent executable: $BEE_AGENT_BIN, else the build-tree binary.
std::filesystem::path default_agent_binary();

/// Child process handle; the destructor kills and reaps it.
class ChildProcess {
 public:
  ChildProcess() = default;
  explicit ChildProcess(const std::vector<std::string>& argv);
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ChildProcess(ChildProcess&& other) noexcept : pid_(other.pid_) { other.pid_ = -1; }
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ~ChildProcess() { kill(); }

  bool running() const { return pid_ > 0; }
  void kill();
  /// Waits for a voluntary exit; returns false on timeout.
  bool wait_exit(std::chrono::milliseconds timeout);

 private:
  int pid_ = -1;
};

struct Delivery {
  NodeId src = 0;
  int hop_count = 0;
  Bytes payload;
};

struct ForwardFailure {
  NodeId src = 0;
  NodeId dst = 0;
  NodeId relay = 0;  // unreachable next hop
  NodeId at = 0;     // node that could not forward
  Bytes payload;
};

struct NodeStats {
  std::map<NodeId, std::int64_t> rx;  // frames received per neighbour (kHub for the hub)
  std::vector<Delivery> delivered;
  std::vector<ForwardFailure> failures;
};

struct SendResult {
  bool ok = true;
  std::optional<NodeId> relay;  // failed relay when !ok
  std::string error;
};

struct DeliveryReport {
  bool delivered = false;
  int hop_count = 0;
  std::optional<NodeId> failed_relay;
  std::string error;
};

struct LocalNetworkOptions {
  std::filesystem::path agent_binary = default_agent_binary();
  std::filesystem::path workdir;
  std::chrono::milliseconds timeout{10000};
};

class LocalNetwork {
 public:
  LocalNetwork(Topology topology, LocalNetworkOptions options);
  LocalNetwork(const LocalNetwork&) = delete;
  LocalNetwork& operator=(const LocalNetwork&) = delete;
  ~LocalNetwork();

  /// Spawns the processes and waits until every overlay link is up.
  void start();
  void shutdown();

  const Topology& topology() const { return topology_; }
  const AddressMap& addresses() const { return addresses_; }
  bool alive(NodeId node) const { return alive_.at(static_cast<std::size_t>(node)); }

  /// One control request/response round trip.
  json control(NodeId node, const json& request);

  SendResult send(NodeId src, NodeId dst, const Bytes& payload);
  /// Sends and waits until the frame arrives or some relay reports it lost.
  DeliveryReport deliver(NodeId src, NodeId dst, const Bytes& payload);

  NodeStats stats(NodeId node);
  void reset_stats();
  /// Frames observed by live agents per directed link (from, to).
  std::map<Link, std::int64_t> observed_link_frames();
  /// Waits until deliveries plus in-network failures reach `expected`.
  bool wait_settled(std::size_t expected);

  /// SIGKILLs a node and waits until its neighbours drop the links.
  void kill(NodeId node);
  void kill_hub();

 private:
  void wait_links_up();

  Topology topology_;
  LocalNetworkOptions options_;
  AddressMap addresses_;
  std::vector<ChildProcess> agents_;
  ChildProcess hub_;
  std::vector<bool> alive_;
  struct Channel {
    Socket sock;
    std::string buffer;
  };
  std::map<NodeId, Channel> channels_;
};

}  // namespace bee::net
