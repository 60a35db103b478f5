#pragma once

// Fixtures, seeded generators and independent oracles shared by the unit
// tests and the acceptance suite.

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bee/backend.hpp"
#include "bee/orchestrator.hpp"
#include "bee/rng.hpp"
#include "bee/topology.hpp"

namespace bee::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

ComputeSystem make_system(const std::string& id, int hosts, double time_slot, double cpu_rate = 1.0,
                          SystemKind kind = SystemKind::hpc);
AppSpec make_app(const std::string& name, double work_total, int processes);
HardwareConfig make_uconf(NetworkSolution net = NetworkSolution::p2p_tree,
                          StorageSolution storage = StorageSolution::virtio_passthrough);

/// Randomized workflow scenario on SimHPC systems. work_total is a multiple
/// of 1/16 so per-slot progress deltas add up exactly.
struct Scenario {
  std::uint64_t seed = 0;
  ResourcePool pool;
  ResourcePool fresh_pool;  // one long slot: finishes whatever is left
  AppSpec app;
  HardwareConfig uconf;
  Bytes input;
};

Scenario make_scenario(std::uint64_t seed);

/// Stores `input` in the volume store under `store` and returns its volume.
DataVolume stage_input(const std::filesystem::path& store, const Bytes& input);

orchestrator::RunResult run_sim(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf,
                                const DataVolume& data, const std::filesystem::path& store, std::uint64_t seed,
                                std::optional<storage::Checkpoint> resume = std::nullopt,
                                BackendConfig config = {});

// Oracles, written against the definitions rather than the engine.

/// Adjacency from the edge set, then breadth-first hop counts.
std::vector<std::vector<int>> bfs_hops(const net::Topology& topo);

/// Heap-tree parent links walked by hand.
int tree_distance(int a, int b);

/// Frames per directed link for a trace, by walking explicit paths. Multicast
/// counts one frame into the hub and one out to each other node.
std::map<net::Link, std::int64_t> oracle_link_frames(const net::Topology& topo, const net::Trace& trace);

/// Pairs (src, dst), src != dst, whose route avoids `dead` entirely.
std::set<std::pair<int, int>> oracle_surviving_pairs(const net::Topology& topo, int dead);

/// Final volume of an uninterrupted run, by replaying the iteration chain.
std::string oracle_output_digest(const Bytes& input, double work_total);

/// Checkpoint write seconds on the master: virtio writes at 90% of native,
/// the NFS master and provider file systems at native speed.
double oracle_checkpoint_seconds(const ComputeSystem& system, StorageSolution storage, bool native_shared_fs,
                                 std::uint64_t bytes);

}  // namespace bee::test
