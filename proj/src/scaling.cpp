#include "bee/scaling.hpp"

#include <algorithm>

namespace bee {

void to_json(json& j, const ScalingRow& r) {
  j = json{{"processes", r.processes},
           {"compute_s", r.compute_s},
           {"comm_s", r.comm_s},
           {"runtime_s", r.runtime_s},
           {"speedup", r.speedup},
           {"messages_on_wire", r.messages_on_wire},
           {"bottleneck_frames", r.bottleneck_frames},
           {"total_hops", r.total_hops}};
}

net::CommCost flat_cost(int n, const net::Trace& trace) {
  net::CommCost c;
  for (int i = 0; i < n; ++i) c.per_node_relay_load[i] = 0;
  for (const auto& s : trace) {
    const std::int64_t frames = s.dst == net::kBroadcast ? n - 1 : (s.dst == s.src ? 0 : 1);
    c.messages_on_wire += frames;
    c.total_hops += frames;
    c.bytes_on_wire += static_cast<std::uint64_t>(frames) * s.bytes;
    if (frames) c.hop_histogram[1] += frames;
    if (s.dst == net::kBroadcast) {
      for (int j = 0; j < n; ++j) {
        if (j != s.src) c.per_link_frames[{s.src, j}] += 1;
      }
    } else if (frames) {
      c.per_link_frames[{s.src, s.dst}] += 1;
    }
  }
  return c;
}

namespace {

bool power_of_two(int p) { return p >= 1 && (p & (p - 1)) == 0; }

}  // namespace

std::vector<ScalingRow> replay_scaling(const AppSpec& app, const ComputeSystem& system,
                                       const BackendCapability& capability, NetworkSolution topology,
                                       const std::vector<int>& process_counts, const BackendConfig& config) {
  const double overhead = capability.perf.cpu_overhead_fraction;
  const double message_s =
      static_cast<double>(config.message_bytes) / kBytesPerMB / capability.perf.net_bandwidth;
  const double baseline = sim_compute(app.work_total, 1, system.cpu_rate_native, overhead);

  std::vector<ScalingRow> rows;
  for (int p : process_counts) {
    if (!power_of_two(p)) throw Error("process count " + std::to_string(p) + " is not a power of two");
    if (p > static_cast<int>(system.hosts.size()))
      throw Error("process count " + std::to_string(p) + " exceeds the " + std::to_string(system.hosts.size()) +
                  " hosts of " + system.id);
    ScalingRow r;
    r.processes = p;
    r.compute_s = sim_compute(app.work_total, p, system.cpu_rate_native, overhead);
    if (p > 1) {
      const auto trace =
          net::pattern_trace(app.comm_pattern, p, config.sends_per_process, config.message_bytes, config.seed);
      net::CommCost cost;
      if (capability.perf.flat_network) {
        cost = flat_cost(p, trace);
      } else {
        cost = net::cost_of_trace(net::build_topology(topology, p), trace);
      }
      std::int64_t bottleneck = 0;
      if (!capability.perf.flat_network && topology == NetworkSolution::multicast) {
        bottleneck = cost.messages_on_wire;
      } else {
        std::map<net::NodeId, std::int64_t> transmit;
        for (const auto& [link, frames] : cost.per_link_frames) transmit[link.from] += frames;
        for (const auto& [node, frames] : transmit) bottleneck = std::max(bottleneck, frames);
      }
      r.messages_on_wire = cost.messages_on_wire;
      r.bottleneck_frames = bottleneck;
      r.total_hops = cost.total_hops;
      r.comm_s = static_cast<double>(bottleneck) * message_s +
                 static_cast<double>(cost.total_hops) / p * capability.perf.hop_latency_s;
    }
    r.runtime_s = r.compute_s + r.comm_s;
    r.speedup = baseline / r.runtime_s;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace bee
