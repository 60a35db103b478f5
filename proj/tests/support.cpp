#include "support.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>

#include "bee/digest.hpp"
#include "bee/storage.hpp"
#include "bee/workload.hpp"

namespace bee::test {

TempDir::TempDir() {
  auto pattern = (std::filesystem::temp_directory_path() / "bee-test-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw Error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

ComputeSystem make_system(const std::string& id, int hosts, double time_slot, double cpu_rate, SystemKind kind) {
  ComputeSystem s;
  s.id = id;
  s.kind = kind;
  for (int i = 0; i < hosts; ++i) s.hosts.push_back({id + "-h" + std::to_string(i)});
  s.time_slot = time_slot;
  s.net_bandwidth_native = 1000.0;
  s.disk_bandwidth_native = {500.0, 400.0};
  s.cpu_rate_native = cpu_rate;
  return s;
}

AppSpec make_app(const std::string& name, double work_total, int processes) {
  AppSpec a;
  a.name = name;
  a.container_source = ImageRef{"bee/" + name + ":1"};
  a.entry_command = {"mpirun", name};
  a.process_count = processes;
  a.work_total = work_total;
  return a;
}

HardwareConfig make_uconf(NetworkSolution net, StorageSolution storage) {
  HardwareConfig u;
  u.vcpus = 2;
  u.ram_mb = 2048;
  u.network_solution = net;
  u.storage_solution = storage;
  return u;
}

Scenario make_scenario(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5ce7a210));
  Scenario sc;
  sc.seed = seed;
  const int systems = static_cast<int>(rng.between(1, 3));
  const int processes = static_cast<int>(rng.between(1, 4));
  const double rates[] = {0.05, 0.1, 0.2};
  double capacity = 0.0;
  for (int i = 0; i < systems; ++i) {
    const int hosts = static_cast<int>(rng.between(processes, 6));
    const double slot = static_cast<double>(rng.between(20, 90)) * 10.0;
    const double rate = rates[rng.below(3)];
    sc.pool.systems.push_back(make_system("sys" + std::to_string(i), hosts, slot, rate));
    capacity += slot * rate * processes * 0.91;
  }
  // Between a quarter and twice the pool's compute capacity: some runs
  // finish in the first slot, some migrate, some stall.
  const double target = capacity * (0.25 + 1.75 * rng.unit());
  const double work_total = std::max(1.0, std::floor(target * 16.0)) / 16.0;
  sc.app = make_app("app" + std::to_string(seed), work_total, processes);
  sc.app.comm_pattern.kind = CommPattern::Kind::all_to_all;
  sc.uconf = make_uconf(rng.chance(0.5) ? NetworkSolution::p2p_tree : NetworkSolution::p2p_star,
                        rng.chance(0.5) ? StorageSolution::virtio_passthrough : StorageSolution::data_image_nfs);
  sc.input.resize(static_cast<std::size_t>(rng.between(0, 4096)));
  for (auto& b : sc.input) b = static_cast<std::uint8_t>(rng.below(256));
  sc.fresh_pool.systems.push_back(make_system("fresh", 4, 1e7, 1.0));
  return sc;
}

DataVolume stage_input(const std::filesystem::path& store, const Bytes& input) {
  storage::VolumeStore volumes(store);
  const auto id = "input-" + sha256_hex(input).substr(0, 16);
  return volumes.exists(id) ? volumes.get(id) : volumes.create(id, input);
}

orchestrator::RunResult run_sim(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf,
                                const DataVolume& data, const std::filesystem::path& store, std::uint64_t seed,
                                std::optional<storage::Checkpoint> resume, BackendConfig config) {
  config.kind = BackendKind::sim_hpc;
  config.seed = seed;
  orchestrator::WorkflowOptions options;
  options.store = store;
  options.seed = seed;
  options.resume_from = std::move(resume);
  return orchestrator::run_workflow(pool, app, data, uconf, backend_factory(config), options);
}

std::vector<std::vector<int>> bfs_hops(const net::Topology& topo) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(topo.n));
  for (const auto& e : topo.edges) {
    adj[static_cast<std::size_t>(e.a)].push_back(e.b);
    adj[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(topo.n), std::vector<int>(topo.n, -1));
  for (int s = 0; s < topo.n; ++s) {
    auto& d = dist[static_cast<std::size_t>(s)];
    std::deque<int> q{s};
    d[static_cast<std::size_t>(s)] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (d[static_cast<std::size_t>(v)] < 0) {
          d[static_cast<std::size_t>(v)] = d[static_cast<std::size_t>(u)] + 1;
          q.push_back(v);
        }
      }
    }
  }
  return dist;
}

namespace {

std::vector<int> ancestors(int x) {
  std::vector<int> up{x};
  while (x > 0) {
    x = (x - 1) / 2;
    up.push_back(x);
  }
  return up;
}

std::vector<int> oracle_path(const net::Topology& topo, int a, int b) {
  if (a == b) return {a};
  switch (topo.kind) {
    case NetworkSolution::multicast: return {a, b};
    case NetworkSolution::p2p_star:
      if (a == 0 || b == 0) return {a, b};
      return {a, 0, b};
    case NetworkSolution::p2p_tree: {
      const auto ua = ancestors(a);
      const auto ub = ancestors(b);
      int lca = 0;
      for (int x : ua) {
        if (std::find(ub.begin(), ub.end(), x) != ub.end()) {
          lca = x;
          break;
        }
      }
      std::vector<int> path;
      for (int x : ua) {
        path.push_back(x);
        if (x == lca) break;
      }
      std::vector<int> down;
      for (int x : ub) {
        if (x == lca) break;
        down.push_back(x);
      }
      path.insert(path.end(), down.rbegin(), down.rend());
      return path;
    }
  }
  return {};
}

}  // namespace

int tree_distance(int a, int b) {
  net::Topology t;
  t.kind = NetworkSolution::p2p_tree;
  return static_cast<int>(oracle_path(t, a, b).size()) - 1;
}

std::map<net::Link, std::int64_t> oracle_link_frames(const net::Topology& topo, const net::Trace& trace) {
  std::map<net::Link, std::int64_t> frames;
  for (const auto& s : trace) {
    std::vector<int> dsts;
    if (s.dst == net::kBroadcast) {
      for (int j = 0; j < topo.n; ++j) {
        if (j != s.src) dsts.push_back(j);
      }
    } else {
      dsts.push_back(s.dst);
    }
    if (topo.kind == NetworkSolution::multicast) {
      // The hub repeats each frame once to every other station.
      for (int j = 0; j < topo.n; ++j) {
        if (j != s.src) frames[{net::kHub, j}] += 1;
      }
      continue;
    }
    for (int d : dsts) {
      const auto path = oracle_path(topo, s.src, d);
      for (std::size_t k = 0; k + 1 < path.size(); ++k) frames[{path[k], path[k + 1]}] += 1;
    }
  }
  return frames;
}

std::set<std::pair<int, int>> oracle_surviving_pairs(const net::Topology& topo, int dead) {
  std::set<std::pair<int, int>> ok;
  for (int a = 0; a < topo.n; ++a) {
    for (int b = 0; b < topo.n; ++b) {
      if (a == b || a == dead || b == dead) continue;
      const auto path = oracle_path(topo, a, b);
      if (std::find(path.begin(), path.end(), dead) == path.end()) ok.insert({a, b});
    }
  }
  return ok;
}

std::string oracle_output_digest(const Bytes& input, double work_total) {
  // A volume without a trailer is tick 0; run the chain to the end.
  auto state = workload::decode(input);
  workload::advance(state, workload::total_ticks(work_total));
  return sha256_hex(workload::encode(state));
}

double oracle_checkpoint_seconds(const ComputeSystem& system, StorageSolution storage, bool native_shared_fs,
                                 std::uint64_t bytes) {
  const double native = system.disk_bandwidth_native.write;
  const double bw = (storage == StorageSolution::virtio_passthrough && !native_shared_fs) ? 0.9 * native : native;
  return static_cast<double>(bytes) / (1024.0 * 1024.0) / bw;
}

}  // namespace bee::test
