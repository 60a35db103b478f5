#include "bee/agent.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <fstream>
#include <map>
#include <memory>

#include "bee/socket.hpp"
#include "bee/wire.hpp"
#include "bee/workload.hpp"

namespace bee::net {

const NodePorts& AddressMap::at(NodeId id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return n;
  }
  throw Error("no address for node " + std::to_string(id));
}

void to_json(json& j, const NodePorts& p) {
  j = json{{"id", p.id}, {"mpi_port", p.mpi_port}, {"control_port", p.control_port}};
}

void from_json(const json& j, NodePorts& p) {
  p.id = j.at("id").get<NodeId>();
  p.mpi_port = j.at("mpi_port").get<std::uint16_t>();
  p.control_port = j.at("control_port").get<std::uint16_t>();
}

void to_json(json& j, const AddressMap& m) {
  j = json{{"nodes", m.nodes}, {"hub_port", m.hub_port ? json(*m.hub_port) : json(nullptr)}};
}

void from_json(const json& j, AddressMap& m) {
  m.nodes = j.at("nodes").get<std::vector<NodePorts>>();
  if (j.contains("hub_port") && !j.at("hub_port").is_null()) {
    m.hub_port = j.at("hub_port").get<std::uint16_t>();
  } else {
    m.hub_port.reset();
  }
}

void to_json(json& j, const Topology& t) {
  json edges = json::array();
  for (const auto& e : t.edges) edges.push_back({e.a, e.b});
  j = json{{"kind", to_string(t.kind)}, {"n", t.n}, {"edges", edges}};
}

void from_json(const json& j, Topology& t) {
  t = build_topology(parse_network_solution(j.at("kind").get<std::string>()), j.at("n").get<int>());
  if (j.contains("edges")) {
    std::set<Edge> edges;
    for (const auto& e : j.at("edges")) {
      const auto a = e.at(0).get<NodeId>();
      const auto b = e.at(1).get<NodeId>();
      edges.insert({std::min(a, b), std::max(a, b)});
    }
    if (edges != t.edges) throw Error("topology edges do not match the " + to_string(t.kind) + " layout");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

struct Peer {
  Socket sock;
  FrameDecoder decoder;
  std::optional<NodeId> id;  // known after hello
};

struct Control {
  Socket sock;
  std::string buffer;
};

// Toy work loop: progress advances with wall time while started and not paused.
struct AppClock {
  bool started = false;
  bool paused = false;
  std::int64_t start_ticks = 0;
  std::int64_t total_ticks = 0;
  double ticks_per_second = 0.0;
  double delay_s = 0.0;
  Clock::time_point started_at;
  Clock::time_point paused_at;
  Clock::duration paused_total{};

  std::int64_t ticks(Clock::time_point now) const {
    if (!started) return start_ticks;
    const auto end = paused ? paused_at : now;
    const double active = std::chrono::duration<double>(end - started_at - paused_total).count() - delay_s;
    const auto done = static_cast<std::int64_t>(std::max(0.0, active) * ticks_per_second);
    return std::min(total_ticks, start_ticks + done);
  }
};

class Agent {
 public:
  explicit Agent(const AgentOptions& options)
      : self_(options.node), topo_(options.topology), addresses_(options.addresses), workdir_(options.workdir) {}

  int run() {
    const auto& me = addresses_.at(self_);
    mpi_listener_ = listen_tcp(me.mpi_port);
    control_listener_ = listen_tcp(me.control_port);
    std::filesystem::create_directories(workdir_);
    connect_uplinks();
    loop();
    return 0;
  }

 private:
  void connect_uplinks() {
    using namespace std::chrono_literals;
    if (topo_.kind == TopologyKind::multicast) {
      if (!addresses_.hub_port) throw Error("multicast topology without hub address");
      add_outgoing(kHub, connect_tcp(*addresses_.hub_port, 10s));
      return;
    }
    for (NodeId other : topo_.neighbors(self_)) {
      if (other < self_) add_outgoing(other, connect_tcp(addresses_.at(other).mpi_port, 10s));
    }
  }

  void add_outgoing(NodeId id, Socket sock) {
    const auto hello = encode_frame(Frame{static_cast<std::uint16_t>(self_), kHelloDst, 0, {}});
    write_all(sock.fd(), hello);
    auto peer = std::make_unique<Peer>();
    peer->sock = std::move(sock);
    peer->id = id;
    links_[id] = peer->sock.fd();
    peers_.push_back(std::move(peer));
  }

  void loop() {
    while (!stopping_) {
      std::vector<pollfd> fds;
      fds.push_back({mpi_listener_.fd(), POLLIN, 0});
      fds.push_back({control_listener_.fd(), POLLIN, 0});
      for (const auto& p : peers_) fds.push_back({p->sock.fd(), POLLIN, 0});
      for (const auto& c : controls_) fds.push_back({c->sock.fd(), POLLIN, 0});

      if (::poll(fds.data(), fds.size(), 200) < 0) {
        if (errno == EINTR) continue;
        throw Error("poll failed");
      }
      if (fds[0].revents & POLLIN) {
        auto peer = std::make_unique<Peer>();
        peer->sock = accept_tcp(mpi_listener_);
        peers_.push_back(std::move(peer));
      }
      if (fds[1].revents & POLLIN) {
        auto c = std::make_unique<Control>();
        c->sock = accept_tcp(control_listener_);
        controls_.push_back(std::move(c));
      }
      std::vector<int> ready;
      for (std::size_t i = 2; i < fds.size(); ++i) {
        if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) ready.push_back(fds[i].fd);
      }
      for (int fd : ready) {
        if (!service_peer(fd)) service_control(fd);
        if (stopping_) break;
      }
    }
  }

  bool service_peer(int fd) {
    auto it = std::find_if(peers_.begin(), peers_.end(), [&](const auto& p) { return p->sock.fd() == fd; });
    if (it == peers_.end()) return false;
    Peer& peer = **it;
    std::uint8_t buf[65536];
    ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) return true;
      if (peer.id) links_.erase(*peer.id);
      peers_.erase(it);
      return true;
    }
    peer.decoder.feed(std::span(buf, static_cast<std::size_t>(n)));
    while (auto frame = peer.decoder.next()) {
      if (frame->dst == kHelloDst) {
        peer.id = frame->src;
        links_[frame->src] = fd;
        continue;
      }
      if (!peer.id) continue;
      on_frame(*peer.id, std::move(*frame));
    }
    return true;
  }

  void on_frame(NodeId from, Frame frame) {
    rx_[from] += 1;
    frame.hop_count = static_cast<std::uint16_t>(frame.hop_count + 1);
    if (frame.dst == self_) {
      delivered_.push_back(json{{"src", frame.src}, {"hop_count", frame.hop_count}, {"payload", to_hex(frame.payload)}});
      return;
    }
    // On the multicast subnet a frame for someone else is simply ignored.
    if (topo_.kind == TopologyKind::multicast) return;
    forward(std::move(frame));
  }

  // Returns the unreachable relay, if any.
  std::optional<NodeId> forward(const Frame& frame) {
    const NodeId next = next_hop(topo_, self_, frame.dst);
    auto link = links_.find(next);
    if (link == links_.end() || !write_all(link->second, encode_frame(frame))) {
      failures_.push_back(json{{"src", frame.src},
                               {"dst", frame.dst},
                               {"relay", next},
                               {"at", self_},
                               {"payload", to_hex(frame.payload)}});
      return next;
    }
    return std::nullopt;
  }

  void service_control(int fd) {
    auto it = std::find_if(controls_.begin(), controls_.end(), [&](const auto& c) { return c->sock.fd() == fd; });
    if (it == controls_.end()) return;
    Control& c = **it;
    char buf[65536];
    ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) return;
      controls_.erase(it);
      return;
    }
    c.buffer.append(buf, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = c.buffer.find('\n')) != std::string::npos) {
      const std::string line = c.buffer.substr(0, pos);
      c.buffer.erase(0, pos + 1);
      json reply;
      try {
        reply = handle(json::parse(line));
      } catch (const std::exception& e) {
        reply = json{{"ok", false}, {"error", e.what()}};
      }
      write_all(fd, reply.dump() + "\n");
      if (stopping_) return;
    }
  }

  json handle(const json& req) {
    const auto cmd = req.at("cmd").get<std::string>();
    if (cmd == "status") {
      json links = json::array();
      for (const auto& [id, fd] : links_) links.push_back(id);
      return {{"ok", true}, {"node", self_}, {"links", links}};
    }
    if (cmd == "send") return send(req.at("dst").get<NodeId>(), from_hex(req.value("payload", std::string())));
    if (cmd == "stats") {
      json rx = json::object();
      for (const auto& [from, count] : rx_) rx[std::to_string(from)] = count;
      return {{"ok", true}, {"node", self_}, {"rx", rx}, {"delivered", delivered_}, {"failures", failures_}};
    }
    if (cmd == "reset_stats") {
      rx_.clear();
      delivered_ = json::array();
      failures_ = json::array();
      return {{"ok", true}};
    }
    if (cmd == "exec") {
      // The container layer is a tag on the node: record the command.
      const auto argv = req.at("argv").get<std::vector<std::string>>();
      std::string line;
      for (const auto& a : argv) line += a + " ";
      std::ofstream(workdir_ / "container.log", std::ios::app) << line << '\n';
      return {{"ok", true}};
    }
    if (cmd == "put_volume") {
      std::filesystem::copy_file(req.at("path").get<std::string>(), workdir_ / "volume.bin",
                                 std::filesystem::copy_options::overwrite_existing);
      return {{"ok", true}};
    }
    if (cmd == "start_app") {
      app_ = AppClock{};
      app_.started = true;
      app_.start_ticks = req.at("start_ticks").get<std::int64_t>();
      app_.total_ticks = req.at("total_ticks").get<std::int64_t>();
      app_.ticks_per_second = req.at("ticks_per_second").get<double>();
      app_.delay_s = req.value("delay_s", 0.0);
      app_.started_at = Clock::now();
      return {{"ok", true}};
    }
    if (cmd == "progress") return {{"ok", true}, {"ticks", app_.ticks(Clock::now())}};
    if (cmd == "pause") {
      if (app_.started && !app_.paused) {
        app_.paused = true;
        app_.paused_at = Clock::now();
      }
      return {{"ok", true}};
    }
    if (cmd == "resume") {
      if (app_.paused) {
        app_.paused_total += Clock::now() - app_.paused_at;
        app_.paused = false;
      }
      return {{"ok", true}};
    }
    if (cmd == "snapshot") {
      const auto volume_path = workdir_ / "volume.bin";
      Bytes volume = std::filesystem::exists(volume_path) ? read_file_bytes(volume_path) : Bytes{};
      const auto ticks = std::max(app_.ticks(Clock::now()), workload::progress_ticks(volume));
      volume = workload::advance(volume, ticks);
      write_file_bytes(volume_path, volume);
      write_file_bytes(req.at("path").get<std::string>(), volume);
      return {{"ok", true}, {"ticks", ticks}, {"digest", sha256_hex(volume)}};
    }
    if (cmd == "stop") {
      stopping_ = true;
      return {{"ok", true}};
    }
    throw Error("unknown command '" + cmd + "'");
  }

  json send(NodeId dst, Bytes payload) {
    if (dst < 0 || dst >= topo_.n || dst == self_) throw Error("bad destination " + std::to_string(dst));
    Frame frame{static_cast<std::uint16_t>(self_), static_cast<std::uint16_t>(dst), 0, std::move(payload)};
    if (topo_.kind == TopologyKind::multicast) {
      auto hub = links_.find(kHub);
      if (hub == links_.end() || !write_all(hub->second, encode_frame(frame)))
        return {{"ok", false}, {"error", "multicast hub unreachable"}, {"relay", kHub}};
      return {{"ok", true}};
    }
    const auto failed = forward(frame);
    if (failed) {
      failures_.erase(failures_.end() - 1);
      return {{"ok", false}, {"error", "relay " + std::to_string(*failed) + " unreachable"}, {"relay", *failed}};
    }
    return {{"ok", true}};
  }

  NodeId self_;
  Topology topo_;
  AddressMap addresses_;
  std::filesystem::path workdir_;
  Socket mpi_listener_;
  Socket control_listener_;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::vector<std::unique_ptr<Control>> controls_;
  std::map<NodeId, int> links_;
  std::map<NodeId, std::int64_t> rx_;
  json delivered_ = json::array();
  json failures_ = json::array();
  AppClock app_;
  bool stopping_ = false;
};

}  // namespace

int run_agent(const AgentOptions& options) {
  Agent agent(options);
  return agent.run();
}

int run_hub(const AddressMap& addresses) {
  if (!addresses.hub_port) throw Error("address map has no hub port");
  Socket listener = listen_tcp(*addresses.hub_port);
  std::vector<std::unique_ptr<Peer>> peers;
  for (;;) {
    std::vector<pollfd> fds;
    fds.push_back({listener.fd(), POLLIN, 0});
    for (const auto& p : peers) fds.push_back({p->sock.fd(), POLLIN, 0});
    if (::poll(fds.data(), fds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      return 1;
    }
    if (fds[0].revents & POLLIN) {
      auto peer = std::make_unique<Peer>();
      peer->sock = accept_tcp(listener);
      peers.push_back(std::move(peer));
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      auto it = std::find_if(peers.begin(), peers.end(), [&](const auto& p) { return p->sock.fd() == fds[i].fd; });
      if (it == peers.end()) continue;
      std::uint8_t buf[65536];
      ssize_t n = ::recv(fds[i].fd, buf, sizeof buf, 0);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        peers.erase(it);
        continue;
      }
      Peer& from = **it;
      from.decoder.feed(std::span(buf, static_cast<std::size_t>(n)));
      while (auto frame = from.decoder.next()) {
        if (frame->dst == kHelloDst) {
          from.id = frame->src;
          continue;
        }
        const auto bytes = encode_frame(*frame);
        for (const auto& other : peers) {
          if (other.get() != &from && other->id) write_all(other->sock.fd(), bytes);
        }
      }
    }
  }
}

}  // namespace bee::net
