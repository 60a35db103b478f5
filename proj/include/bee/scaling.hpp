#pragma once

// Trace-replay scaling study. Runtime at p processes is compute time plus a
// communication term derived from the overlay cost model:
//   comm = bottleneck_frames * message_time + (total_hops / p) * hop_latency
// where the bottleneck is the busiest transmitter. A multicast subnet is one
// shared medium, so every delivery on the wire is serialized. A flat provider
// network sends every message directly in one hop.

#include <vector>

#include "bee/backend.hpp"

namespace bee {

struct ScalingRow {
  int processes = 1;
  double compute_s = 0.0;
  double comm_s = 0.0;
  double runtime_s = 0.0;
  double speedup = 1.0;
  std::int64_t messages_on_wire = 0;
  std::int64_t bottleneck_frames = 0;
  std::int64_t total_hops = 0;

  bool operator==(const ScalingRow&) const = default;
};

void to_json(json& j, const ScalingRow& r);

/// Bottleneck frames, wire messages and hops of `trace` on a flat network.
net::CommCost flat_cost(int n, const net::Trace& trace);

/// One row per process count (powers of two, at most one per host).
std::vector<ScalingRow> replay_scaling(const AppSpec& app, const ComputeSystem& system,
                                       const BackendCapability& capability, NetworkSolution topology,
                                       const std::vector<int>& process_counts, const BackendConfig& config);

}  // namespace bee
