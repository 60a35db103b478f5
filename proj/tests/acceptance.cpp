// Acceptance suite: one PASS/FAIL line per criterion. Each check returns a
// JSON artifact built from its seeded generators; the determinism check
// rebuilds those artifacts and compares them byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "bee/cli.hpp"
#include "bee/cluster.hpp"
#include "bee/local_network.hpp"
#include "bee/scaling.hpp"
#include "bee/sim_backend.hpp"
#include "bee/storage.hpp"
#include "bee/workload.hpp"
#include "support.hpp"

using namespace bee;
using bee::test::make_app;
using bee::test::make_system;
using bee::test::make_uconf;
using bee::test::TempDir;

namespace {

constexpr std::uint64_t kSeed = 20240;
constexpr int kScenarios = 100;
constexpr std::size_t kTrailerBytes = 56;

struct Verdict {
  bool pass = true;
  std::string detail;
  json artifact;
};

/// Collects failures; the first few are kept as the detail line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string detail(const std::string& summary) const {
    if (ok()) return summary;
    std::string s = std::to_string(failures_) + " failure(s):";
    for (const auto& n : notes_) s += " [" + n + "]";
    return s;
  }

 private:
  int failures_ = 0;
  std::vector<std::string> notes_;
};

std::string relative_manifest(const orchestrator::RunResult& r, const std::filesystem::path& store) {
  if (!r.checkpoint_manifest) return {};
  return std::filesystem::relative(*r.checkpoint_manifest, store).generic_string();
}

json run_artifact(const orchestrator::RunResult& r, const std::filesystem::path& store) {
  json j = r;
  j["checkpoint_manifest"] = relative_manifest(r, store);
  return j;
}

double delta_sum(const orchestrator::RunResult& r) {
  double s = 0;
  for (const auto& h : r.history) s += h.progress_delta;
  return s;
}

// Workflow suite shared by conservation and guard safety.

struct ScenarioRun {
  test::Scenario scenario;
  orchestrator::RunResult first;
  std::optional<storage::Checkpoint> checkpoint;
  std::optional<orchestrator::RunResult> resumed;
  std::optional<orchestrator::RunResult> straight;
};

std::vector<ScenarioRun> run_workflow_suite(std::uint64_t seed, json& artifact) {
  std::vector<ScenarioRun> runs;
  artifact = json::array();
  for (int i = 0; i < kScenarios; ++i) {
    const auto s = mix_seed(seed, static_cast<std::uint64_t>(i));
    ScenarioRun run{test::make_scenario(s), {}, {}, {}, {}};
    const auto& sc = run.scenario;
    TempDir dir;
    const auto data = test::stage_input(dir.path(), sc.input);
    run.first = test::run_sim(sc.pool, sc.app, sc.uconf, data, dir.path(), s);
    json entry{{"seed", s}, {"first", run_artifact(run.first, dir.path())}};
    if (run.first.outcome == orchestrator::Outcome::stalled_with_checkpoint) {
      run.checkpoint = storage::CheckpointStore::load(*run.first.checkpoint_manifest);
      run.resumed = test::run_sim(sc.fresh_pool, sc.app, sc.uconf, {}, dir.path(), s, run.checkpoint);
      TempDir other;
      run.straight = test::run_sim(sc.fresh_pool, sc.app, sc.uconf, test::stage_input(other.path(), sc.input),
                                   other.path(), s);
      entry["resumed"] = run_artifact(*run.resumed, dir.path());
      entry["straight"] = run_artifact(*run.straight, other.path());
    }
    artifact.push_back(entry);
    runs.push_back(std::move(run));
  }
  return runs;
}

struct SuiteCache {
  std::vector<ScenarioRun> runs;
  json artifact;
  bool ready = false;
};

SuiteCache& suite() {
  static SuiteCache cache;
  if (!cache.ready) {
    cache.runs = run_workflow_suite(kSeed, cache.artifact);
    cache.ready = true;
  }
  return cache;
}

Verdict conservation() {
  Checker c;
  auto& s = suite();
  int completed = 0, resumed = 0;
  for (const auto& run : s.runs) {
    const auto& sc = run.scenario;
    const auto tag = "seed " + std::to_string(sc.seed);
    const auto want = test::oracle_output_digest(sc.input, sc.app.work_total);
    switch (run.first.outcome) {
      case orchestrator::Outcome::completed:
        ++completed;
        c.expect(delta_sum(run.first) == sc.app.work_total, tag + ": deltas do not sum to work_total");
        c.expect(run.first.output_volume && run.first.output_volume->content_digest == want, tag + ": output digest");
        break;
      case orchestrator::Outcome::stalled_with_checkpoint: {
        ++resumed;
        c.expect(run.checkpoint->progress == delta_sum(run.first), tag + ": checkpoint progress");
        const auto& r = *run.resumed;
        c.expect(r.outcome == orchestrator::Outcome::completed, tag + ": resume did not complete");
        c.expect(run.checkpoint->progress + delta_sum(r) == sc.app.work_total, tag + ": resumed deltas");
        c.expect(run.straight->outcome == orchestrator::Outcome::completed, tag + ": uninterrupted run");
        c.expect(r.output_volume && run.straight->output_volume &&
                     r.output_volume->content_digest == run.straight->output_volume->content_digest,
                 tag + ": resumed digest differs from the uninterrupted run");
        c.expect(r.output_volume && r.output_volume->content_digest == want, tag + ": resumed digest vs oracle");
        break;
      }
      case orchestrator::Outcome::failed: c.expect(false, tag + ": failed: " + run.first.error); break;
    }
  }
  c.expect(completed > 0 && resumed > 0, "suite should mix completed and stalled runs");
  std::ostringstream d;
  d << kScenarios << " scenarios, " << completed << " completed directly, " << resumed << " stalled and resumed";
  return {c.ok(), c.detail(d.str()), s.artifact};
}

Verdict guard_safety() {
  Checker c;
  auto& s = suite();
  int slots = 0, checkpoints = 0;
  for (const auto& run : s.runs) {
    const auto& sc = run.scenario;
    // The checkpoint volume is the input payload plus the progress trailer.
    const auto bytes = static_cast<std::uint64_t>(sc.input.size() + kTrailerBytes);
    auto check_run = [&](const orchestrator::RunResult& r, const ResourcePool& pool) {
      for (const auto& h : r.history) {
        ++slots;
        const auto tag = "seed " + std::to_string(sc.seed) + " on " + h.system_id;
        const auto* sys = pool.find(h.system_id);
        const double T = sys->time_slot;
        const double est = test::oracle_checkpoint_seconds(*sys, sc.uconf.storage_solution, false, bytes);
        const double guard = std::max(2.0 * est, 0.05 * T);
        c.expect(h.slot_duration_used <= T, tag + ": slot overrun");
        c.expect(h.guard_s == guard, tag + ": guard window differs from the rule");
        if (h.ended_by != orchestrator::EndedBy::timeslot_checkpoint) continue;
        ++checkpoints;
        c.expect(h.checkpoint_started_s >= T - h.guard_s, tag + ": checkpoint started early");
        c.expect(h.checkpoint_s <= h.guard_s, tag + ": checkpoint longer than the guard");
        c.expect(h.checkpoint_started_s + h.checkpoint_s <= T, tag + ": checkpoint ends after the slot");
      }
    };
    check_run(run.first, sc.pool);
    if (run.resumed) check_run(*run.resumed, sc.fresh_pool);
  }
  std::ostringstream d;
  d << slots << " slots, " << checkpoints << " guard checkpoints";
  return {c.ok(), c.detail(d.str()), s.artifact};
}

// Topology invariants.

json topology_artifact() {
  json a = json::array();
  for (int n = 1; n <= 64; ++n) {
    for (auto kind : {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree}) {
      const auto cost = net::cost_of_trace(net::build_topology(kind, n), net::all_pairs(n));
      a.push_back({{"n", n}, {"kind", to_string(kind)}, {"total_hops", cost.total_hops},
                   {"messages_on_wire", cost.messages_on_wire}, {"max_relay_load", cost.max_relay_load()}});
    }
  }
  return a;
}

Verdict topology_invariants() {
  Checker c;
  std::int64_t pairs = 0;
  for (int n = 1; n <= 64; ++n) {
    const int tree_bound = n > 1 ? 2 * static_cast<int>(std::floor(std::log2(n))) : 0;
    for (auto kind : {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree}) {
      const auto topo = net::build_topology(kind, n);
      const auto tag = to_string(kind) + " n=" + std::to_string(n);
      if (kind != NetworkSolution::multicast) {
        c.expect(static_cast<int>(topo.edges.size()) == n - 1, tag + ": edge count");
      }
      const auto hops = test::bfs_hops(topo);
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (a == b) continue;
          ++pairs;
          const auto path = net::route(topo, a, b);
          const int h = static_cast<int>(path.size()) - 1;
          const auto ptag = tag + " " + std::to_string(a) + "->" + std::to_string(b);
          c.expect(path.front() == a && path.back() == b, ptag + ": endpoints");
          if (kind == NetworkSolution::multicast) {
            c.expect(h == 1, ptag + ": multicast is one hop");
            continue;
          }
          for (std::size_t k = 0; k + 1 < path.size(); ++k)
            c.expect(topo.has_edge(path[k], path[k + 1]), ptag + ": route leaves the edge set");
          c.expect(h == hops[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], ptag + ": not a shortest path");
          if (kind == NetworkSolution::p2p_star) c.expect(h <= 2, ptag + ": star hop bound");
          if (kind == NetworkSolution::p2p_tree) {
            c.expect(h <= tree_bound, ptag + ": tree hop bound");
            c.expect(h == test::tree_distance(a, b), ptag + ": tree distance");
          }
        }
      }
      if (kind == NetworkSolution::multicast && n > 1) {
        for (int src = 0; src < n; ++src) {
          const auto one = net::cost_of_trace(topo, {{src, (src + 1) % n, 1}});
          const auto all = net::cost_of_trace(topo, {{src, net::kBroadcast, 1}});
          c.expect(one.messages_on_wire == n - 1 && all.messages_on_wire == n - 1, tag + ": single-send wire cost");
        }
      }
    }
  }
  return {c.ok(), c.detail("n=1..64, " + std::to_string(pairs) + " ordered pairs"), topology_artifact()};
}

// Agents on the local-process backend.

net::LocalNetworkOptions net_options(const std::filesystem::path& dir) {
  return net::LocalNetworkOptions{net::default_agent_binary(), dir, std::chrono::milliseconds(10000)};
}

Bytes payload(std::size_t i) {
  return {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(i >> 8), 0xa5, 0x5a};
}

json wire_artifact(std::uint64_t seed) {
  json a = json::object();
  for (auto kind : {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree}) {
    const auto topo = net::build_topology(kind, 8);
    const auto trace = net::uniform_pairs(8, 500, seed, 4);
    json frames = json::array();
    for (const auto& [link, count] : net::cost_of_trace(topo, trace).per_link_frames)
      frames.push_back({link.from, link.to, count});
    a[to_string(kind)] = {{"trace", trace.size()}, {"first", {trace.front().src, trace.front().dst}},
                          {"frames", frames}};
  }
  return a;
}

Verdict wire_model_equivalence() {
  Checker c;
  std::int64_t frames_seen = 0;
  for (auto kind : {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree}) {
    const auto tag = to_string(kind);
    TempDir dir;
    net::LocalNetwork network(net::build_topology(kind, 8), net_options(dir.path()));
    network.start();
    const auto trace = net::uniform_pairs(8, 500, kSeed, 4);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto r = network.send(trace[i].src, trace[i].dst, payload(i));
      c.expect(r.ok, tag + ": send " + std::to_string(i) + " rejected");
    }
    c.expect(network.wait_settled(trace.size()), tag + ": trace did not settle");
    const auto model = net::cost_of_trace(network.topology(), trace).per_link_frames;
    c.expect(model == test::oracle_link_frames(network.topology(), trace), tag + ": model differs from the oracle");
    auto seen = network.observed_link_frames();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (seen != model && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      seen = network.observed_link_frames();
    }
    c.expect(seen == model, tag + ": observed frames differ from the model");
    for (const auto& [link, count] : seen) frames_seen += count;
  }
  return {c.ok(), c.detail("n=8, 500 sends per overlay, " + std::to_string(frames_seen) + " frames observed"),
          wire_artifact(kSeed)};
}

/// Victims: a random station under multicast, every interior non-root node of the tree.
std::vector<std::pair<NetworkSolution, int>> fault_cases(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xfa17));
  std::vector<std::pair<NetworkSolution, int>> cases;
  cases.emplace_back(NetworkSolution::multicast, static_cast<int>(rng.between(0, 7)));
  cases.emplace_back(NetworkSolution::multicast, static_cast<int>(rng.between(0, 7)));
  for (int node : {1, 2, 3}) cases.emplace_back(NetworkSolution::p2p_tree, node);
  return cases;
}

json fault_artifact(std::uint64_t seed) {
  json a = json::array();
  for (const auto& [kind, dead] : fault_cases(seed)) {
    const auto pairs = test::oracle_surviving_pairs(net::build_topology(kind, 8), dead);
    a.push_back({{"kind", to_string(kind)}, {"dead", dead}, {"surviving", json(std::vector(pairs.begin(), pairs.end()))}});
  }
  return a;
}

Verdict fault_asymmetry() {
  Checker c;
  std::size_t broken = 0, delivered_total = 0;
  for (const auto& [kind, dead] : fault_cases(kSeed)) {
    const auto tag = to_string(kind) + " kill " + std::to_string(dead);
    TempDir dir;
    net::LocalNetwork network(net::build_topology(kind, 8), net_options(dir.path()));
    network.start();
    network.kill(dead);
    std::set<std::pair<int, int>> delivered;
    std::size_t i = 0;
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        if (a == b || a == dead || b == dead) continue;
        const auto r = network.deliver(a, b, payload(i++));
        if (r.delivered) delivered.insert({a, b});
      }
    }
    const auto want = test::oracle_surviving_pairs(network.topology(), dead);
    c.expect(delivered == want, tag + ": delivered set differs from the oracle");
    if (kind == NetworkSolution::multicast) c.expect(delivered.size() == 42, tag + ": multicast lost a delivery");
    if (kind == NetworkSolution::p2p_tree) broken += 42 - want.size();
    delivered_total += delivered.size();
  }
  std::ostringstream d;
  d << delivered_total << " deliveries, " << broken << " tree pairs cut by interior failures";
  return {c.ok(), c.detail(d.str()), fault_artifact(kSeed)};
}

// Storage and compute models.

Verdict storage_model() {
  Checker c;
  std::ostringstream out, err;
  const int code = cli::run({"iobench", "--solution", "data_image_nfs", "--max-nodes", "32", "--json"}, out, err);
  c.expect(code == cli::kExitOk, "iobench exited " + std::to_string(code));
  json artifact;
  double lo = 1e300, hi = 0;
  if (code == cli::kExitOk) {
    artifact = json::parse(out.str());
    for (const auto& row : artifact.at("rows")) {
      const int n = row.at("n_nodes").get<int>();
      if (n < 2) continue;
      for (const char* key : {"worker_aggregate_write", "worker_aggregate_read"}) {
        const double v = row.at(key).get<double>();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        c.expect(v >= 120.0 && v <= 130.0, std::string(key) + " at n=" + std::to_string(n) + " is " + std::to_string(v));
      }
    }
  }
  storage::StoragePlan virtio;
  virtio.solution = StorageSolution::virtio_passthrough;
  virtio.native_read = 1000;
  virtio.native_write = 1000;
  auto rel = [](double got, double want) { return std::abs(got - want) / want; };
  for (const auto& row : storage::io_bench(virtio, 32)) {
    const auto tag = "virtio n=" + std::to_string(row.n_nodes);
    c.expect(rel(row.master_read, 1000) <= 1e-9 && rel(row.master_write, 900) <= 1e-9, tag + ": master");
    if (row.n_nodes > 1)
      c.expect(rel(row.worker_read, 1000) <= 1e-9 && rel(row.worker_write, 900) <= 1e-9, tag + ": worker");
  }
  std::ostringstream d;
  d << std::fixed << std::setprecision(1) << "NFS worker aggregate " << lo << ".." << hi
    << " MB/s over n=2..32, virtio 1000/900";
  artifact["virtio"] = storage::io_bench(virtio, 32);
  return {c.ok(), c.detail(d.str()), artifact};
}

Verdict compute_overhead() {
  Checker c;
  const auto backend = make_backend(BackendConfig{}, make_system("hpc", 16, 1000));
  const double overhead = backend->cpu_overhead_fraction();
  json artifact = json::array();
  double lo = 1, hi = 0;
  for (int cores : {1, 2, 4, 8, 16}) {
    const double native = sim_compute(1000, cores, 1.0, 0.0);
    const double virt = sim_compute(1000, cores, 1.0, overhead);
    const double loss = 1.0 - native / virt;
    lo = std::min(lo, loss);
    hi = std::max(hi, loss);
    c.expect(std::abs(loss - 0.09) <= 0.001, "loss at " + std::to_string(cores) + " cores is " + std::to_string(loss));
    artifact.push_back({{"cores", cores}, {"native_s", native}, {"virtual_s", virt}, {"loss", loss}});
  }
  c.expect(hi - lo <= 1e-12, "loss varies with core count");
  std::ostringstream d;
  d << std::fixed << std::setprecision(4) << "throughput loss " << lo * 100 << "% at 1..16 cores";
  return {c.ok(), c.detail(d.str()), artifact};
}

json scaling_rows(SystemKind kind, NetworkSolution topology, const std::vector<int>& counts) {
  auto app = make_app("scaling", 1000, 1);
  app.comm_pattern.kind = CommPattern::Kind::one_to_one_heavy;
  BackendConfig config;
  config.seed = kSeed;
  const auto sys = make_system(kind == SystemKind::hpc ? "hpc" : "aws", 64, 1000, 1.0, kind);
  const auto backend = make_backend(config, sys);
  return replay_scaling(app, sys, backend->capability(), topology, counts, backend->config());
}

Verdict scaling_order() {
  Checker c;
  json artifact;
  for (auto kind : {NetworkSolution::p2p_tree, NetworkSolution::p2p_star, NetworkSolution::multicast})
    artifact["hpc"][to_string(kind)] = scaling_rows(SystemKind::hpc, kind, {1, 16, 64});
  artifact["aws"] = scaling_rows(SystemKind::cloud_aws_like, NetworkSolution::p2p_tree, {1, 16, 64});
  auto runtime = [&](const char* kind, int row) { return artifact["hpc"][kind][row].at("runtime_s").get<double>(); };
  for (int row : {1, 2}) {
    const auto tag = "p=" + std::to_string(row == 1 ? 16 : 64);
    c.expect(runtime("p2p_tree", row) <= runtime("p2p_star", row), tag + ": tree slower than star");
    c.expect(runtime("p2p_star", row) <= runtime("multicast", row), tag + ": star slower than multicast");
  }
  const double cloud = artifact["aws"][2].at("speedup").get<double>();
  double best_hpc = 0;
  for (const char* kind : {"p2p_tree", "p2p_star", "multicast"})
    best_hpc = std::max(best_hpc, artifact["hpc"][kind][2].at("speedup").get<double>());
  c.expect(cloud >= best_hpc, "cloud speedup below the HPC overlay at 64 processes");
  std::ostringstream d;
  d << std::fixed << std::setprecision(1) << "speedup at 64: cloud " << cloud << ", tree " << best_hpc
    << ", star " << artifact["hpc"]["p2p_star"][2].at("speedup").get<double>() << ", multicast "
    << artifact["hpc"]["multicast"][2].at("speedup").get<double>();
  return {c.ok(), c.detail(d.str()), artifact};
}

// Deployment pipeline.

struct DeployCase {
  int hosts;
  HardwareConfig uconf;
  bool build;
  int parallelism;
  std::string fault_action;
  int fault_stage;
  int fault_host;
};

DeployCase deploy_case(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xdeb1));
  DeployCase d;
  d.hosts = static_cast<int>(rng.between(1, 8));
  const NetworkSolution nets[] = {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree};
  d.uconf = make_uconf(nets[rng.below(3)],
                       rng.chance(0.5) ? StorageSolution::virtio_passthrough : StorageSolution::data_image_nfs);
  d.build = rng.chance(0.5);
  d.parallelism = static_cast<int>(rng.between(1, 3));
  const std::vector<std::pair<std::string, int>> steps{
      {"create_vm", 2},     {"create_img", 2}, {"configure", 2},       {"setup_shared_vol", 2},
      {"setup_network", 2}, {"register_vm", 2}, {"start_vm", 2},       {"create_docker", 3},
      {d.build ? "img_build" : "img_pull", 3},  {"register_docker", 3}, {"start_docker", 3},
      {"start_app", 4}};
  const auto& [action, stage] = steps[rng.below(steps.size())];
  d.fault_action = action;
  d.fault_stage = stage;
  d.fault_host = stage == 4 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(d.hosts)));
  return d;
}

ComputeSystem deploy_system(int hosts) {
  auto s = make_system("dep", 0, 1000);
  for (int i = 0; i < hosts; ++i) s.hosts.push_back({"h" + std::to_string(i)});
  return s;
}

AppSpec deploy_app(const DeployCase& d) {
  auto app = make_app("dep", 10, d.hosts);
  if (d.build) app.container_source = Buildfile{"Dockerfile"};
  return app;
}

json deploy_artifact(std::uint64_t seed) {
  json a = json::array();
  for (int i = 0; i < 50; ++i) {
    const auto s = mix_seed(seed, static_cast<std::uint64_t>(i));
    const auto d = deploy_case(s);
    const auto sys = deploy_system(d.hosts);
    BackendConfig config;
    config.seed = s;
    SimBackend b(config, sys);
    const auto c = cluster::deploy_cluster(sys.hosts, deploy_app(d), "c", d.uconf, b);
    a.push_back({{"seed", s}, {"cluster", c}, {"fault", d.fault_action}, {"fault_host", d.fault_host}});
  }
  return a;
}

Verdict deployment_pipeline() {
  Checker c;
  int faults = 0;
  for (int i = 0; i < 50; ++i) {
    const auto s = mix_seed(kSeed, static_cast<std::uint64_t>(i));
    const auto d = deploy_case(s);
    const auto tag = "seed " + std::to_string(s);
    const auto sys = deploy_system(d.hosts);
    const auto app = deploy_app(d);
    BackendConfig config;
    config.seed = s;

    SimBackend seq_backend(config, sys), par_backend(config, sys), all_backend(config, sys);
    cluster::DeployOptions seq, par;
    seq.parallelism = 1;
    par.parallelism = d.parallelism;
    const auto a = cluster::deploy_cluster(sys.hosts, app, "c", d.uconf, seq_backend, seq);
    const auto b = cluster::deploy_cluster(sys.hosts, app, "c", d.uconf, par_backend, par);
    const auto all = cluster::deploy_cluster(sys.hosts, app, "c", d.uconf, all_backend);
    c.expect(json(a) == json(b) && json(a) == json(all), tag + ": parallel start changed the cluster");

    double last_t = 0;
    int last_stage = 1;
    for (const auto& e : all.events) {
      c.expect(e.stage >= last_stage && e.t >= last_t, tag + ": event out of order: " + e.action);
      last_stage = e.stage;
      last_t = e.t;
    }
    c.expect(all.events.back().action == "start_app" && all.events.back().host == "h0", tag + ": app start last");
    c.expect(all.status == cluster::Status::app_running, tag + ": not running");

    auto faulty = config;
    faulty.faults = {{Fault::Kind::deploy_step, "dep", "h" + std::to_string(d.fault_host), d.fault_action, 0, 1}};
    SimBackend fb(faulty, sys);
    try {
      cluster::deploy_cluster(sys.hosts, app, "c", d.uconf, fb, par);
      c.expect(false, tag + ": fault at " + d.fault_action + " was ignored");
    } catch (const cluster::DeployError& e) {
      ++faults;
      c.expect(e.stage() == d.fault_stage, tag + ": " + d.fault_action + " reported stage " + std::to_string(e.stage()));
      c.expect(e.host() == "h" + std::to_string(d.fault_host), tag + ": wrong failing host " + e.host());
      c.expect(e.state().status == cluster::Status::stopped, tag + ": cluster not stopped");
      c.expect(fb.registry().empty(), tag + ": registry not empty after teardown");
    }
  }
  return {c.ok(), c.detail("50 deploys, " + std::to_string(faults) + " injected faults torn down cleanly"),
          deploy_artifact(kSeed)};
}

// Determinism across two builds of every artifact.

Verdict determinism(const std::vector<json>& first) {
  Checker c;
  const std::vector<std::pair<std::string, std::function<json()>>> generators{
      {"workflow suite",
       [] {
         json a;
         run_workflow_suite(kSeed, a);
         return a;
       }},
      {"topology", topology_artifact},
      {"wire", [] { return wire_artifact(kSeed); }},
      {"faults", [] { return fault_artifact(kSeed); }},
      {"iobench", [] { return storage_model().artifact; }},
      {"compute", [] { return compute_overhead().artifact; }},
      {"scaling", [] { return scaling_order().artifact; }},
      {"deploy", [] { return deploy_artifact(kSeed); }},
  };
  const std::vector<std::size_t> original{0, 2, 3, 4, 5, 6, 7, 8};
  std::size_t bytes = 0;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto again = generators[i].second().dump();
    bytes += again.size();
    c.expect(again == first[original[i]].dump(), generators[i].first + ": artifact changed between runs");
  }
  return {c.ok(), c.detail(std::to_string(generators.size()) + " artifacts, " + std::to_string(bytes) + " bytes identical"),
          nullptr};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Verdict()> run;
  };
  std::vector<json> artifacts;
  const std::vector<Criterion> criteria{
      {1, "workflow conservation and resume equivalence", 30, conservation},
      {2, "guard safety", 30, guard_safety},
      {3, "topology invariants", 10, topology_invariants},
      {4, "wire frames equal the cost model", 60, wire_model_equivalence},
      {5, "fault asymmetry", 60, fault_asymmetry},
      {6, "storage model", 5, storage_model},
      {7, "compute overhead", 5, compute_overhead},
      {8, "scaling order", 30, scaling_order},
      {9, "deployment pipeline", 30, deployment_pipeline},
      {10, "determinism", 10, [&] { return determinism(artifacts); }},
  };
  int failed = 0;
  for (const auto& crit : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = crit.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what(), nullptr};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= crit.limit_s) {
      v.pass = false;
      v.detail += " (over the time limit)";
    }
    artifacts.push_back(v.artifact);
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " AC" << crit.id << " " << crit.name << " (" << std::fixed
              << std::setprecision(2) << secs << " s of " << std::setprecision(0) << crit.limit_s << " s): "
              << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
