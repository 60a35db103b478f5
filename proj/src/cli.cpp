#include "bee/cli.hpp"

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bee/digest.hpp"
#include "bee/json_io.hpp"
#include "bee/orchestrator.hpp"
#include "bee/scaling.hpp"
#include "bee/storage.hpp"
#include "bee/topology.hpp"

namespace bee::cli {

namespace {

class ConfigError : public Error {
 public:
  using Error::Error;
};

json load_file(const std::filesystem::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing --" + what + " file");
  if (!std::filesystem::exists(path)) throw ConfigError(what + " file not found: " + path.string());
  try {
    return read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(what + " file " + path.string() + ": " + e.what());
  }
}

template <typename T>
T parse_as(const json& j, const std::filesystem::path& path, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const std::exception& e) {
    throw ConfigError(what + " file " + path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void print_report(std::ostream& os, const ValidationReport& report, Format format) {
  if (format == Format::json) {
    os << json{{"valid", report.empty()}, {"violations", report}}.dump(2) << "\n";
    return;
  }
  if (report.empty()) {
    os << "valid\n";
    return;
  }
  for (const auto& v : report) os << v.field << ": " << v.rule << " (" << v.message << ")\n";
}

int exit_code(orchestrator::Outcome outcome) {
  switch (outcome) {
    case orchestrator::Outcome::completed: return kExitOk;
    case orchestrator::Outcome::stalled_with_checkpoint: return kExitStalled;
    case orchestrator::Outcome::failed: return kExitFailed;
  }
  return kExitFailed;
}

void print_result(std::ostream& os, const orchestrator::RunResult& r, Format format) {
  if (format == Format::json) {
    os << json(r).dump(2) << "\n";
    return;
  }
  os << "run " << r.run_id << ": " << orchestrator::to_string(r.outcome) << "\n";
  os << "progress " << r.state.progress << " after " << r.history.size() << " slot(s)\n";
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const auto& s = r.history[i];
    os << "  " << i << " " << s.system_id << " " << orchestrator::to_string(s.ended_by) << " used "
       << fixed(s.slot_duration_used) << " s, +" << s.progress_delta;
    if (!s.detail.empty()) os << " (" << s.detail << ")";
    os << "\n";
  }
  if (r.output_volume) os << "output " << r.output_volume->id << " " << r.output_volume->content_digest << "\n";
  if (r.checkpoint_manifest) os << "checkpoint " << r.checkpoint_manifest->string() << "\n";
  if (!r.error.empty()) os << "error: " << r.error << "\n";
}

struct RunFlags {
  CliConfig config;
  std::string backend = "sim";
  std::filesystem::path backend_config;
  std::filesystem::path data_file;
  bool loop_pool = false;
  bool json = false;
  int parallelism = 0;
};

void add_config_flags(CLI::App* cmd, RunFlags& f, bool need_store) {
  cmd->add_option("--pool", f.config.pool_file, "resource pool JSON")->envname("BEE_POOL");
  cmd->add_option("--app", f.config.app_file, "application JSON")->envname("BEE_APP");
  cmd->add_option("--uconf", f.config.uconf_file, "hardware config JSON")->envname("BEE_UCONF");
  if (need_store) cmd->add_option("--store", f.config.store_dir, "checkpoint and volume store")->envname("BEE_STORE");
  cmd->add_option("--seed", f.config.seed, "simulation seed")->envname("BEE_SEED");
  cmd->add_flag("--json", f.json, "JSON output")->envname("BEE_JSON");
}

void add_backend_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--backend", f.backend, "sim, sim-hpc, local, sim-cloud-aws or sim-cloud-baremetal")
      ->envname("BEE_BACKEND");
  cmd->add_option("--backend-config", f.backend_config, "backend calibration JSON")->envname("BEE_BACKEND_CONFIG");
}

BackendConfig backend_config(const RunFlags& f, const LoadedConfig& loaded, bool backend_given) {
  BackendConfig c = loaded.backend.value_or(BackendConfig{});
  if (!f.backend_config.empty())
    c = parse_as<BackendConfig>(load_file(f.backend_config, "backend-config"), f.backend_config, "backend-config");
  if (backend_given || !loaded.backend) c.kind = parse_backend_kind(f.backend);
  c.seed = f.config.seed;
  return c;
}

int cmd_validate(RunFlags& f, std::ostream& out) {
  f.config.format = f.json ? Format::json : Format::text;
  const auto loaded = load_config(f.config);
  const auto report = validate(loaded.pool, loaded.app, loaded.uconf);
  print_report(out, report, f.config.format);
  return report.empty() ? kExitOk : kExitConfig;
}

int run_or_resume(RunFlags& f, bool backend_given, const std::optional<std::filesystem::path>& checkpoint,
                  std::ostream& out, std::ostream& err) {
  f.config.format = f.json ? Format::json : Format::text;
  const auto loaded = load_config(f.config);
  const auto report = validate(loaded.pool, loaded.app, loaded.uconf);
  if (!report.empty()) {
    print_report(err, report, Format::text);
    return kExitConfig;
  }
  if (f.config.store_dir.empty()) throw ConfigError("missing --store directory");
  const auto bconf = backend_config(f, loaded, backend_given);

  orchestrator::WorkflowOptions options;
  options.store = f.config.store_dir;
  options.loop_pool = f.loop_pool;
  options.seed = f.config.seed;
  options.poll_interval_s = bconf.poll_interval_s;
  options.parallelism = f.parallelism;

  DataVolume data;
  if (checkpoint) {
    try {
      options.resume_from = storage::CheckpointStore::load(*checkpoint);
    } catch (const std::exception& e) {
      err << "checkpoint corrupt: " << e.what() << "\n";
      return kExitFailed;
    }
  } else {
    Bytes input;
    if (!f.data_file.empty()) {
      if (!std::filesystem::exists(f.data_file)) throw ConfigError("data file not found: " + f.data_file.string());
      input = read_file_bytes(f.data_file);
    }
    storage::VolumeStore volumes(options.store);
    const auto id = "input-" + sha256_hex(input).substr(0, 16);
    data = volumes.exists(id) ? volumes.get(id) : volumes.create(id, input);
  }

  const auto factory = backend_factory(bconf, options.store / "local");
  orchestrator::RunResult result;
  try {
    result = orchestrator::run_workflow(loaded.pool, loaded.app, data, loaded.uconf, factory, options);
  } catch (const storage::CorruptCheckpoint& e) {
    err << e.what() << "\n";
    return kExitFailed;
  }
  print_result(out, result, f.config.format);
  return exit_code(result.outcome);
}

int cmd_status(const std::filesystem::path& store, const std::string& run_id, bool as_json, std::ostream& out,
               std::ostream& err) {
  if (store.empty()) throw ConfigError("missing --store directory");
  if (run_id.empty()) {
    json runs = json::array();
    if (std::filesystem::is_directory(store)) {
      std::vector<std::string> ids;
      for (const auto& e : std::filesystem::directory_iterator(store)) {
        if (std::filesystem::exists(e.path() / "state.json")) ids.push_back(e.path().filename().string());
      }
      std::sort(ids.begin(), ids.end());
      for (const auto& id : ids) runs.push_back(id);
    }
    if (as_json) {
      out << json{{"runs", runs}}.dump(2) << "\n";
    } else {
      for (const auto& id : runs) out << id.get<std::string>() << "\n";
    }
    return kExitOk;
  }
  const auto path = orchestrator::state_path(store, run_id);
  if (!std::filesystem::exists(path)) {
    err << "no run '" << run_id << "' in " << store.string() << "\n";
    return kExitConfig;
  }
  const auto state = read_json_file(path);
  if (as_json) {
    out << state.dump(2) << "\n";
    return kExitOk;
  }
  if (state.at("outcome").is_null()) {
    out << "run " << run_id << ": " << state.at("state").at("phase").get<std::string>() << "\n";
  } else {
    print_result(out, state.get<orchestrator::RunResult>(), Format::text);
  }
  return kExitOk;
}

net::Trace parse_trace(const std::filesystem::path& path, int n) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("malformed trace " + path.string() + ": " + e.what());
  }
  const json& sends = j.is_object() ? j.value("sends", json()) : j;
  if (!sends.is_array()) throw ConfigError("malformed trace " + path.string() + ": expected an array of sends");
  net::Trace trace;
  for (const auto& s : sends) {
    net::Send send;
    try {
      send.src = s.at("src").get<int>();
      send.dst = s.at("dst").is_string() && s.at("dst") == "all" ? net::kBroadcast : s.at("dst").get<int>();
      send.bytes = s.value("bytes", std::uint64_t{1});
    } catch (const std::exception& e) {
      throw ConfigError("malformed trace " + path.string() + ": " + e.what());
    }
    const bool dst_ok = send.dst == net::kBroadcast || (send.dst >= 0 && send.dst < n);
    if (send.src < 0 || send.src >= n || !dst_ok)
      throw ConfigError("malformed trace " + path.string() + ": endpoint out of range for n=" + std::to_string(n));
    trace.push_back(send);
  }
  return trace;
}

json cost_json(const net::Topology& topo, const net::CommCost& c) {
  json relay = json::object();
  for (const auto& [node, load] : c.per_node_relay_load) relay[std::to_string(node)] = load;
  json hist = json::object();
  for (const auto& [hops, count] : c.hop_histogram) hist[std::to_string(hops)] = count;
  return json{{"kind", to_string(topo.kind)},
              {"n", topo.n},
              {"messages_on_wire", c.messages_on_wire},
              {"total_hops", c.total_hops},
              {"bytes_on_wire", c.bytes_on_wire},
              {"max_relay_load", c.max_relay_load()},
              {"per_node_relay_load", relay},
              {"hop_histogram", hist}};
}

int cmd_topo(const std::string& kind, int n, const std::filesystem::path& trace_file, bool as_json,
             std::ostream& out) {
  NetworkSolution solution;
  try {
    solution = parse_network_solution(kind);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (n < 1) throw ConfigError("n must be at least 1");
  const auto topo = net::build_topology(solution, n);
  const auto trace = trace_file.empty() ? net::all_pairs(n) : parse_trace(trace_file, n);
  const auto cost = net::cost_of_trace(topo, trace);
  const auto j = cost_json(topo, cost);
  if (as_json) {
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << to_string(solution) << " n=" << n << " sends=" << trace.size() << "\n";
  out << "messages_on_wire " << cost.messages_on_wire << "\n";
  out << "total_hops " << cost.total_hops << "\n";
  out << "hop_histogram";
  for (const auto& [hops, count] : cost.hop_histogram) out << " " << hops << ":" << count;
  out << "\nrelay_load";
  for (const auto& [node, load] : cost.per_node_relay_load) out << " " << node << ":" << load;
  out << "\n";
  return kExitOk;
}

int cmd_iobench(const std::string& solution, int max_nodes, double native_read, double native_write,
                double nfs_cap, bool as_json, std::ostream& out) {
  storage::StoragePlan plan;
  try {
    plan.solution = parse_storage_solution(solution);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  plan.native_read = native_read;
  plan.native_write = native_write;
  plan.nfs_cap = nfs_cap;
  if (max_nodes < 1) throw ConfigError("--max-nodes must be at least 1");
  try {
    storage::check_plan(plan);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto rows = storage::io_bench(plan, max_nodes);
  if (as_json) {
    out << json{{"plan", plan}, {"rows", rows}}.dump(2) << "\n";
    return kExitOk;
  }
  out << "nodes master_w master_r worker_w worker_r workers_agg_w workers_agg_r agg_w agg_r (MB/s)\n";
  for (const auto& r : rows) {
    out << r.n_nodes << " " << fixed(r.master_write, 1) << " " << fixed(r.master_read, 1) << " "
        << fixed(r.worker_write, 1) << " " << fixed(r.worker_read, 1) << " " << fixed(r.worker_aggregate_write, 1)
        << " " << fixed(r.worker_aggregate_read, 1) << " " << fixed(r.aggregate_write, 1) << " "
        << fixed(r.aggregate_read, 1) << "\n";
  }
  return kExitOk;
}

int cmd_scaling(RunFlags& f, bool backend_given, const std::string& system_id, const std::string& kind,
                const std::vector<int>& counts, std::ostream& out) {
  const auto pool_json = load_file(f.config.pool_file, "pool");
  LoadedConfig loaded;
  loaded.pool = parse_as<ResourcePool>(pool_json, f.config.pool_file, "pool");
  if (pool_json.is_object() && pool_json.contains("backend"))
    loaded.backend = parse_as<BackendConfig>(pool_json.at("backend"), f.config.pool_file, "pool");
  loaded.app = parse_as<AppSpec>(load_file(f.config.app_file, "app"), f.config.app_file, "app");
  if (loaded.pool.systems.empty()) throw ConfigError("pool has no systems");
  const ComputeSystem* system = system_id.empty() ? &loaded.pool.systems.front() : loaded.pool.find(system_id);
  if (!system) throw ConfigError("no system '" + system_id + "' in the pool");
  NetworkSolution topology;
  try {
    topology = parse_network_solution(kind);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  auto bconf = backend_config(f, loaded, backend_given);
  if (bconf.kind == BackendKind::local) throw ConfigError("scaling replay runs on a simulated backend");
  const auto backend = make_backend(bconf, *system);
  std::vector<int> ps = counts;
  if (ps.empty()) {
    for (int p = 1; p <= static_cast<int>(system->hosts.size()); p *= 2) ps.push_back(p);
  }
  std::vector<ScalingRow> rows;
  try {
    rows = replay_scaling(loaded.app, *system, backend->capability(), topology, ps, bconf);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (f.json) {
    out << json{{"system", system->id}, {"topology", to_string(topology)}, {"rows", rows}}.dump(2) << "\n";
    return kExitOk;
  }
  out << system->id << " " << to_string(topology) << "\n";
  out << "processes compute_s comm_s runtime_s speedup\n";
  for (const auto& r : rows) {
    out << r.processes << " " << fixed(r.compute_s) << " " << fixed(r.comm_s) << " " << fixed(r.runtime_s) << " "
        << fixed(r.speedup, 2) << "\n";
  }
  return kExitOk;
}

}  // namespace

LoadedConfig load_config(const CliConfig& config) {
  LoadedConfig loaded;
  const auto pool_json = load_file(config.pool_file, "pool");
  loaded.pool = parse_as<ResourcePool>(pool_json, config.pool_file, "pool");
  if (pool_json.is_object() && pool_json.contains("backend"))
    loaded.backend = parse_as<BackendConfig>(pool_json.at("backend"), config.pool_file, "pool");
  loaded.app = parse_as<AppSpec>(load_file(config.app_file, "app"), config.app_file, "app");
  loaded.uconf = parse_as<HardwareConfig>(load_file(config.uconf_file, "uconf"), config.uconf_file, "uconf");
  return loaded;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Build and execution environment for containerized HPC workloads", "bee"};
  app.require_subcommand(1);

  RunFlags f;
  std::filesystem::path checkpoint;
  std::string run_id;
  std::string kind = "p2p_tree";
  int n = 8;
  std::filesystem::path trace_file;
  std::string solution = "data_image_nfs";
  int max_nodes = 32;
  double native_read = 1000.0;
  double native_write = 1000.0;
  double nfs_cap = storage::kDefaultNfsCap;
  std::string system_id;
  std::vector<int> counts;

  auto* validate_cmd = app.add_subcommand("validate", "check the pool, app and uconf files");
  add_config_flags(validate_cmd, f, false);

  auto* run_cmd = app.add_subcommand("run", "run a workflow across the pool");
  add_config_flags(run_cmd, f, true);
  add_backend_flags(run_cmd, f);
  run_cmd->add_flag("--loop-pool", f.loop_pool, "revisit systems while progress is made")->envname("BEE_LOOP_POOL");
  run_cmd->add_option("--data", f.data_file, "input data file")->envname("BEE_DATA");
  run_cmd->add_option("--parallelism", f.parallelism, "concurrent VM starts (0: all)");

  auto* resume_cmd = app.add_subcommand("resume", "continue a run from a checkpoint");
  resume_cmd->add_option("checkpoint", checkpoint, "checkpoint directory or manifest.json")->required();
  add_config_flags(resume_cmd, f, true);
  add_backend_flags(resume_cmd, f);
  resume_cmd->add_flag("--loop-pool", f.loop_pool, "revisit systems while progress is made")
      ->envname("BEE_LOOP_POOL");
  resume_cmd->add_option("--parallelism", f.parallelism, "concurrent VM starts (0: all)");

  auto* status_cmd = app.add_subcommand("status", "show a run's persisted state");
  status_cmd->add_option("run_id", run_id, "run id (omit to list runs)");
  status_cmd->add_option("--store", f.config.store_dir, "checkpoint and volume store")->envname("BEE_STORE");
  status_cmd->add_flag("--json", f.json, "JSON output")->envname("BEE_JSON");

  auto* topo_cmd = app.add_subcommand("topo", "communication cost of a trace on an overlay");
  topo_cmd->add_option("--kind", kind, "multicast, p2p_star or p2p_tree");
  topo_cmd->add_option("--n", n, "node count");
  topo_cmd->add_option("--trace", trace_file, "trace JSON (default: all pairs)");
  topo_cmd->add_flag("--json", f.json, "JSON output")->envname("BEE_JSON");

  auto* io_cmd = app.add_subcommand("iobench", "modeled IOR-style bandwidth table");
  io_cmd->add_option("--solution", solution, "data_image_nfs or virtio_passthrough");
  io_cmd->add_option("--max-nodes", max_nodes, "largest node count");
  io_cmd->add_option("--read", native_read, "native read MB/s");
  io_cmd->add_option("--write", native_write, "native write MB/s");
  io_cmd->add_option("--nfs-cap", nfs_cap, "NFS ceiling MB/s");
  io_cmd->add_flag("--json", f.json, "JSON output")->envname("BEE_JSON");

  auto* scaling_cmd = app.add_subcommand("scaling", "trace-replay speedup study");
  scaling_cmd->add_option("--pool", f.config.pool_file, "resource pool JSON")->envname("BEE_POOL");
  scaling_cmd->add_option("--app", f.config.app_file, "application JSON")->envname("BEE_APP");
  scaling_cmd->add_option("--system", system_id, "system id (default: first)");
  scaling_cmd->add_option("--kind", kind, "overlay topology");
  scaling_cmd->add_option("--counts", counts, "process counts (default: 1, 2, 4, ...)")->delimiter(',');
  scaling_cmd->add_option("--seed", f.config.seed, "simulation seed")->envname("BEE_SEED");
  scaling_cmd->add_flag("--json", f.json, "JSON output")->envname("BEE_JSON");
  add_backend_flags(scaling_cmd, f);

  std::vector<std::string> argv_store{"bee"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  const auto backend_given = [](CLI::App* cmd) {
    const auto* opt = cmd->get_option_no_throw("--backend");
    return opt && opt->count() > 0;
  };

  try {
    if (validate_cmd->parsed()) return cmd_validate(f, out);
    if (run_cmd->parsed()) return run_or_resume(f, backend_given(run_cmd), std::nullopt, out, err);
    if (resume_cmd->parsed()) return run_or_resume(f, backend_given(resume_cmd), checkpoint, out, err);
    if (status_cmd->parsed()) return cmd_status(f.config.store_dir, run_id, f.json, out, err);
    if (topo_cmd->parsed()) return cmd_topo(kind, n, trace_file, f.json, out);
    if (io_cmd->parsed()) return cmd_iobench(solution, max_nodes, native_read, native_write, nfs_cap, f.json, out);
    if (scaling_cmd->parsed()) return cmd_scaling(f, backend_given(scaling_cmd), system_id, kind, counts, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitConfig;
}

}  // namespace bee::cli
