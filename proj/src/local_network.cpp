#include "bee/local_network.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <thread>

#include "bee/digest.hpp"

#ifndef BEE_AGENT_PATH
#define BEE_AGENT_PATH "bee-agent"
#endif

namespace bee::net {

std::filesystem::path default_agent_binary() {
  if (const char* env = std::getenv("BEE_AGENT_BIN"); env && *env) return env;
  return BEE_AGENT_PATH;
}

ChildProcess::ChildProcess(const std::vector<std::string>& argv) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_ = ::fork();
  if (pid_ < 0) throw Error("fork failed");
  if (pid_ == 0) {
    ::execv(args[0], args.data());
    ::_exit(127);
  }
}

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
  if (this != &other) {
    kill();
    pid_ = other.pid_;
    other.pid_ = -1;
  }
  return *this;
}

void ChildProcess::kill() {
  if (pid_ <= 0) return;
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
  pid_ = -1;
}

bool ChildProcess::wait_exit(std::chrono::milliseconds timeout) {
  if (pid_ <= 0) return true;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
      pid_ = -1;
      return true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return false;
}

LocalNetwork::LocalNetwork(Topology topology, LocalNetworkOptions options)
    : topology_(std::move(topology)), options_(std::move(options)) {
  if (options_.workdir.empty()) throw Error("local network needs a working directory");
  alive_.assign(static_cast<std::size_t>(topology_.n), false);
}

LocalNetwork::~LocalNetwork() { shutdown(); }

void LocalNetwork::start() {
  std::filesystem::create_directories(options_.workdir);
  for (NodeId i = 0; i < topology_.n; ++i) addresses_.nodes.push_back({i, pick_free_port(), pick_free_port()});
  if (topology_.kind == TopologyKind::multicast) addresses_.hub_port = pick_free_port();

  const auto topo_file = options_.workdir / "topology.json";
  const auto addr_file = options_.workdir / "addresses.json";
  write_json_file(topo_file, json(topology_));
  write_json_file(addr_file, json(addresses_));

  const std::string bin = options_.agent_binary.string();
  if (addresses_.hub_port) hub_ = ChildProcess({bin, "--hub", "--addresses", addr_file.string()});
  for (NodeId i = 0; i < topology_.n; ++i) {
    const auto dir = options_.workdir / ("node" + std::to_string(i));
    agents_.emplace_back(std::vector<std::string>{bin, "--node", std::to_string(i), "--topology", topo_file.string(),
                                                  "--addresses", addr_file.string(), "--workdir", dir.string()});
    alive_[static_cast<std::size_t>(i)] = true;
  }
  wait_links_up();
}

void LocalNetwork::shutdown() {
  channels_.clear();
  for (auto& a : agents_) a.kill();
  hub_.kill();
  agents_.clear();
  std::fill(alive_.begin(), alive_.end(), false);
}

json LocalNetwork::control(NodeId node, const json& request) {
  if (!alive(node)) throw Error("node " + std::to_string(node) + " is not running");
  auto it = channels_.find(node);
  if (it == channels_.end()) {
    Channel ch;
    ch.sock = connect_tcp(addresses_.at(node).control_port, options_.timeout);
    it = channels_.emplace(node, std::move(ch)).first;
  }
  auto& ch = it->second;
  std::string line;
  if (!write_all(ch.sock.fd(), request.dump() + "\n") || !read_line(ch.sock.fd(), ch.buffer, line)) {
    channels_.erase(it);
    throw Error("control channel to node " + std::to_string(node) + " closed");
  }
  return json::parse(line);
}

void LocalNetwork::wait_links_up() {
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  for (NodeId i = 0; i < topology_.n; ++i) {
    const std::size_t want = topology_.kind == TopologyKind::multicast ? 1 : topology_.neighbors(i).size();
    for (;;) {
      json status;
      try {
        status = control(i, {{"cmd", "status"}});
      } catch (const Error&) {
        status = json{{"links", json::array()}};
      }
      if (status.at("links").size() >= want) break;
      if (std::chrono::steady_clock::now() > deadline)
        throw Error("agent " + std::to_string(i) + " did not bring its links up");
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
}

SendResult LocalNetwork::send(NodeId src, NodeId dst, const Bytes& payload) {
  const auto reply = control(src, {{"cmd", "send"}, {"dst", dst}, {"payload", to_hex(payload)}});
  SendResult r;
  r.ok = reply.at("ok").get<bool>();
  if (!r.ok) {
    r.error = reply.value("error", std::string("send failed"));
    if (reply.contains("relay")) r.relay = reply.at("relay").get<NodeId>();
  }
  return r;
}

NodeStats LocalNetwork::stats(NodeId node) {
  const auto reply = control(node, {{"cmd", "stats"}});
  NodeStats s;
  for (const auto& [from, count] : reply.at("rx").items()) s.rx[std::stoi(from)] = count.get<std::int64_t>();
  for (const auto& d : reply.at("delivered"))
    s.delivered.push_back({d.at("src").get<NodeId>(), d.at("hop_count").get<int>(),
                           from_hex(d.at("payload").get<std::string>())});
  for (const auto& f : reply.at("failures"))
    s.failures.push_back({f.at("src").get<NodeId>(), f.at("dst").get<NodeId>(), f.at("relay").get<NodeId>(),
                          f.at("at").get<NodeId>(), from_hex(f.at("payload").get<std::string>())});
  return s;
}

void LocalNetwork::reset_stats() {
  for (NodeId i = 0; i < topology_.n; ++i) {
    if (alive(i)) control(i, {{"cmd", "reset_stats"}});
  }
}

std::map<Link, std::int64_t> LocalNetwork::observed_link_frames() {
  std::map<Link, std::int64_t> out;
  for (NodeId i = 0; i < topology_.n; ++i) {
    if (!alive(i)) continue;
    for (const auto& [from, count] : stats(i).rx) out[{from, i}] += count;
  }
  return out;
}

bool LocalNetwork::wait_settled(std::size_t expected) {
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  for (;;) {
    std::size_t seen = 0;
    for (NodeId i = 0; i < topology_.n; ++i) {
      if (!alive(i)) continue;
      const auto s = stats(i);
      seen += s.delivered.size() + s.failures.size();
    }
    if (seen >= expected) return seen == expected;
    if (std::chrono::steady_clock::now() > deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

DeliveryReport LocalNetwork::deliver(NodeId src, NodeId dst, const Bytes& payload) {
  DeliveryReport report;
  const auto sent = send(src, dst, payload);
  if (!sent.ok) {
    report.failed_relay = sent.relay;
    report.error = sent.error;
    return report;
  }
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (alive(dst)) {
      for (const auto& d : stats(dst).delivered) {
        if (d.src == src && d.payload == payload) {
          report.delivered = true;
          report.hop_count = d.hop_count;
          return report;
        }
      }
    }
    for (NodeId i = 0; i < topology_.n; ++i) {
      if (!alive(i)) continue;
      for (const auto& f : stats(i).failures) {
        if (f.src == src && f.dst == dst && f.payload == payload) {
          report.failed_relay = f.relay;
          report.error = "relay " + std::to_string(f.relay) + " unreachable";
          return report;
        }
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  report.error = "delivery timed out";
  return report;
}

void LocalNetwork::kill(NodeId node) {
  channels_.erase(node);
  agents_.at(static_cast<std::size_t>(node)).kill();
  alive_.at(static_cast<std::size_t>(node)) = false;
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  std::vector<NodeId> watchers;
  if (topology_.kind != TopologyKind::multicast) watchers = topology_.neighbors(node);
  for (NodeId w : watchers) {
    if (!alive(w)) continue;
    for (;;) {
      const auto links = control(w, {{"cmd", "status"}}).at("links");
      bool still_up = false;
      for (const auto& l : links) still_up = still_up || l.get<NodeId>() == node;
      if (!still_up) break;
      if (std::chrono::steady_clock::now() > deadline) throw Error("neighbours did not notice node death");
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
}

void LocalNetwork::kill_hub() {
  hub_.kill();
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  for (NodeId i = 0; i < topology_.n; ++i) {
    if (!alive(i)) continue;
    while (!control(i, {{"cmd", "status"}}).at("links").empty()) {
      if (std::chrono::steady_clock::now() > deadline) throw Error("agents did not notice hub death");
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
}

}  // namespace bee::net
