#include "bee/orchestrator.hpp"

#include <algorithm>
#include <deque>

#include "bee/digest.hpp"
#include "bee/workload.hpp"

namespace bee::orchestrator {

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::completed: return "completed";
    case Outcome::stalled_with_checkpoint: return "stalled_with_checkpoint";
    case Outcome::failed: return "failed";
  }
  return "?";
}

std::string to_string(EndedBy ended_by) {
  switch (ended_by) {
    case EndedBy::completion: return "completion";
    case EndedBy::timeslot_checkpoint: return "timeslot_checkpoint";
    case EndedBy::failure: return "failure";
  }
  return "?";
}

Outcome parse_outcome(const std::string& text) {
  for (auto o : {Outcome::completed, Outcome::stalled_with_checkpoint, Outcome::failed}) {
    if (to_string(o) == text) return o;
  }
  throw Error("unknown outcome '" + text + "'");
}

EndedBy parse_ended_by(const std::string& text) {
  for (auto e : {EndedBy::completion, EndedBy::timeslot_checkpoint, EndedBy::failure}) {
    if (to_string(e) == text) return e;
  }
  throw Error("unknown ended_by '" + text + "'");
}

std::string to_string(MonitorStatus status) {
  switch (status) {
    case MonitorStatus::completed: return "completed";
    case MonitorStatus::guard_fired: return "guard_fired";
    case MonitorStatus::failed: return "failed";
  }
  return "?";
}

void to_json(json& j, const SlotRecord& r) {
  j = json{{"system_id", r.system_id},
           {"slot_duration_used", r.slot_duration_used},
           {"progress_delta", r.progress_delta},
           {"ended_by", to_string(r.ended_by)},
           {"transfer_s", r.transfer_s},
           {"deploy_s", r.deploy_s},
           {"guard_s", r.guard_s},
           {"checkpoint_started_s", r.checkpoint_started_s},
           {"checkpoint_s", r.checkpoint_s},
           {"detail", r.detail}};
}

void from_json(const json& j, SlotRecord& r) {
  r.system_id = j.at("system_id").get<std::string>();
  r.slot_duration_used = j.at("slot_duration_used").get<double>();
  r.progress_delta = j.at("progress_delta").get<double>();
  r.ended_by = parse_ended_by(j.at("ended_by").get<std::string>());
  r.transfer_s = j.value("transfer_s", 0.0);
  r.deploy_s = j.value("deploy_s", 0.0);
  r.guard_s = j.value("guard_s", 0.0);
  r.checkpoint_started_s = j.value("checkpoint_started_s", 0.0);
  r.checkpoint_s = j.value("checkpoint_s", 0.0);
  r.detail = j.value("detail", std::string());
}

void to_json(json& j, const RunResult& r) {
  j = json{{"run_id", r.run_id},
           {"outcome", to_string(r.outcome)},
           {"output_volume", r.output_volume ? json(*r.output_volume) : json(nullptr)},
           {"history", r.history},
           {"state", r.state},
           {"checkpoint_manifest", r.checkpoint_manifest ? json(r.checkpoint_manifest->string()) : json(nullptr)},
           {"error", r.error}};
}

void from_json(const json& j, RunResult& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.outcome = parse_outcome(j.at("outcome").get<std::string>());
  if (j.contains("output_volume") && !j.at("output_volume").is_null())
    r.output_volume = j.at("output_volume").get<DataVolume>();
  else
    r.output_volume.reset();
  r.history = j.at("history").get<std::vector<SlotRecord>>();
  r.state = j.at("state").get<RunState>();
  if (j.contains("checkpoint_manifest") && !j.at("checkpoint_manifest").is_null())
    r.checkpoint_manifest = j.at("checkpoint_manifest").get<std::string>();
  else
    r.checkpoint_manifest.reset();
  r.error = j.value("error", std::string());
}

double guard_window(double time_slot, double estimated_checkpoint_s) {
  return std::max(2.0 * estimated_checkpoint_s, 0.05 * time_slot);
}

std::string derive_run_id(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf,
                          const DataVolume& data, std::uint64_t seed) {
  const json key{{"pool", pool}, {"app", app}, {"uconf", uconf}, {"data", data.content_digest}, {"seed", seed}};
  std::string name = app.name.empty() ? "run" : app.name;
  for (auto& ch : name) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return name + "-" + sha256_hex(key.dump()).substr(0, 12);
}

std::filesystem::path state_path(const std::filesystem::path& store, const std::string& run_id) {
  return store / run_id / "state.json";
}

MonitorResult monitor(const cluster::ClusterState& cluster, Backend& backend, double budget, double guard,
                      std::int64_t total_ticks, double poll_interval) {
  if (!(poll_interval > 0)) throw Error("poll interval must be positive");
  const auto& master = cluster.master();
  const double deadline = budget - guard;
  double t = backend.now();
  for (;;) {
    const auto p = backend.progress(master);
    if (p.node_failed) return {MonitorStatus::failed, p.ticks, t, p.failed_host};
    if (p.ticks >= total_ticks) return {MonitorStatus::completed, p.ticks, t, {}};
    if (t >= deadline) return {MonitorStatus::guard_fired, p.ticks, t, {}};
    backend.advance_to(std::min(t + poll_interval, deadline));
    t = backend.now();
  }
}

CheckpointTaken checkpoint_now(RunState& run, cluster::ClusterState& cluster, Backend& backend, const AppSpec& app,
                               storage::CheckpointStore& store, const std::string& run_id, int seq,
                               double clock_offset) {
  if (!app.checkpointable) throw Error("checkpoint unsupported");
  if (run.phase != RunPhase::running && run.phase != RunPhase::checkpointing)
    throw Error("cannot checkpoint while the run is " + bee::to_string(run.phase));
  run.phase = RunPhase::checkpointing;
  if (cluster.status == cluster::Status::app_running) cluster::pause(cluster, backend);
  if (cluster.status != cluster::Status::paused)
    throw Error("cannot checkpoint a cluster that is " + cluster::to_string(cluster.status));

  auto content = backend.fetch_volume(cluster.master());
  if (!content) throw CheckpointWriteError("checkpoint write failed on " + backend.system().id);
  CheckpointTaken taken;
  taken.duration = storage::model_io(cluster.storage_plan, cluster.master().index, storage::IoOp::write,
                                     content->size(), static_cast<int>(cluster.nodes.size()), 0);
  backend.advance_to(backend.now() + taken.duration);
  const double progress = workload::to_work(workload::progress_ticks(*content), app.work_total);
  taken.checkpoint =
      store.write(run_id, seq, progress, backend.system().id, clock_offset + backend.now(), *content);
  taken.content = std::move(*content);
  run.need_migration = true;
  run.last_host_system = backend.system().id;
  run.progress = progress;
  return taken;
}

Restored transfer_and_restore(const storage::Checkpoint& checkpoint, const Bytes& content,
                              const ComputeSystem* from, Backend& to) {
  Restored r;
  const double from_bw = from ? from->net_bandwidth_native : 0.0;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    auto moved = to.transfer(content, from_bw);
    r.duration += moved.duration;
    r.attempts = attempt;
    if (sha256_hex(moved.delivered) == checkpoint.digest) {
      r.content = std::move(moved.delivered);
      r.volume = DataVolume{checkpoint.run_id + "-data", r.content.size(), checkpoint.digest, to.system().id};
      return r;
    }
  }
  throw TransferError("checkpoint " + std::to_string(checkpoint.seq) + " failed its digest check after transfer to " +
                      to.system().id + " (2 attempts)");
}

namespace {

/// Seconds of per-slot I/O: the slowest node reading then writing its share.
double slot_io_seconds(const storage::StoragePlan& plan, const IoProfile& io, int n) {
  double worst = 0.0;
  for (int node = 0; node < n; ++node) {
    const double s = storage::model_io(plan, node, storage::IoOp::read, io.read_bytes_per_slot, n, n - 1) +
                     storage::model_io(plan, node, storage::IoOp::write, io.write_bytes_per_slot, n, n - 1);
    worst = std::max(worst, s);
  }
  return worst;
}

class Workflow {
 public:
  Workflow(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf, const BackendFactory& factory,
           const WorkflowOptions& options)
      : pool_(pool),
        app_(app),
        uconf_(uconf),
        factory_(factory),
        options_(options),
        volumes_(options.store),
        checkpoints_(options.store),
        total_ticks_(workload::total_ticks(app.work_total)) {}

  RunResult run(const DataVolume& data) {
    auto& st = result_.state;
    if (options_.resume_from) {
      const auto& ck = *options_.resume_from;
      result_.run_id = ck.run_id;
      content_ = storage::CheckpointStore::read_verified(ck);
      last_checkpoint_ = ck;
      st.need_migration = true;
      st.last_host_system = ck.origin_system;
      clock_ = ck.created_at;
      next_seq_ = ck.seq + 1;
      if (auto latest = checkpoints_.latest(ck.run_id)) next_seq_ = std::max(next_seq_, latest->seq + 1);
    } else {
      result_.run_id = options_.run_id.empty() ? derive_run_id(pool_, app_, uconf_, data, options_.seed)
                                               : options_.run_id;
      content_ = volumes_.read(data.id);
      if (auto latest = checkpoints_.latest(result_.run_id)) next_seq_ = latest->seq + 1;
    }
    live_id_ = result_.run_id + "-data";
    if (volumes_.exists(live_id_)) {
      if (volumes_.get(live_id_).location != kDetached) volumes_.detach(live_id_);
      volumes_.write(live_id_, content_);
    } else {
      volumes_.create(live_id_, content_);
    }
    st.progress = workload::to_work(workload::progress_ticks(content_), app_.work_total);
    if (workload::progress_ticks(content_) >= total_ticks_) return complete(st.last_host_system.value_or(kDetached));

    std::deque<const ComputeSystem*> queue;
    for (const auto& s : pool_.systems) queue.push_back(&s);
    std::size_t pass_left = queue.size();
    bool pass_progressed = false;
    while (!queue.empty()) {
      const ComputeSystem* system = queue.front();
      queue.pop_front();
      const auto before = workload::progress_ticks(content_);
      if (auto done = slot(*system)) return *done;
      if (workload::progress_ticks(content_) > before) pass_progressed = true;
      if (options_.loop_pool) {
        queue.push_back(system);
        if (--pass_left == 0) {
          if (!pass_progressed) break;
          pass_left = pool_.systems.size();
          pass_progressed = false;
        }
      }
    }
    return stall();
  }

 private:
  /// Runs one time slot; returns a result when the workflow ends.
  std::optional<RunResult> slot(const ComputeSystem& system) {
    auto& st = result_.state;
    auto backend = factory_(system);
    const auto cap = backend->capability();
    const double T = system.time_slot;
    const int n = app_.process_count;
    SlotRecord rec;
    rec.system_id = system.id;
    st.current_system = system.id;
    const auto ticks_before = workload::progress_ticks(content_);

    if (st.need_migration && last_checkpoint_) {
      st.phase = RunPhase::migrating;
      persist();
      try {
        auto restored =
            transfer_and_restore(*last_checkpoint_, content_, pool_.find(*st.last_host_system), *backend);
        rec.transfer_s = restored.duration;
        content_ = std::move(restored.content);
      } catch (const TransferError& e) {
        rec.ended_by = EndedBy::failure;
        rec.detail = e.what();
        rec.slot_duration_used = std::min(backend->now(), T);
        return finish_slot(rec, std::string(e.what()));
      }
    }
    volumes_.write(live_id_, content_);
    volumes_.attach(live_id_, system.id);

    const auto plan = storage::make_plan(uconf_.storage_solution, system, cap.native_shared_fs);
    const auto checkpoint_bytes = workload::encode(workload::decode(content_)).size();
    const double estimate = storage::model_io(plan, 0, storage::IoOp::write, checkpoint_bytes, n, 0);
    rec.guard_s = guard_window(T, estimate);

    st.phase = RunPhase::deploying;
    std::vector<Host> hosts(system.hosts.begin(), system.hosts.begin() + std::min<std::size_t>(n, system.hosts.size()));
    cluster::DeployOptions deploy;
    deploy.parallelism = options_.parallelism;
    deploy.volume = &content_;
    deploy.launch = AppLaunch{ticks_before, total_ticks_, n, slot_io_seconds(plan, app_.io_profile, n)};
    const double deploy_start = backend->now();
    const auto cname = result_.run_id + "-" + std::to_string(result_.history.size());
    cluster::ClusterState cluster;
    try {
      cluster = cluster::deploy_cluster(hosts, app_, cname, uconf_, *backend, deploy);
    } catch (const Error& e) {
      rec.deploy_s = backend->now() - deploy_start;
      rec.ended_by = EndedBy::failure;
      rec.detail = e.what();
      rec.slot_duration_used = std::min(backend->now(), T);
      return finish_slot(rec);
    }
    rec.deploy_s = backend->now() - deploy_start;
    if (backend->now() > T - rec.guard_s) {
      cluster::stop(cluster, *backend);
      rec.ended_by = EndedBy::failure;
      rec.detail = "deployment did not finish before the guard window";
      rec.slot_duration_used = std::min(backend->now(), T);
      return finish_slot(rec);
    }

    st.phase = RunPhase::running;
    persist();
    const auto m = monitor(cluster, *backend, T, rec.guard_s, total_ticks_, options_.poll_interval_s);
    switch (m.status) {
      case MonitorStatus::failed:
        cluster::stop(cluster, *backend);
        rec.ended_by = EndedBy::failure;
        rec.detail = "node failure on host " + m.failed_host;
        rec.slot_duration_used = backend->now();
        return finish_slot(rec);

      case MonitorStatus::completed: {
        auto final_content = backend->fetch_volume(cluster.master());
        cluster::stop(cluster, *backend);
        rec.slot_duration_used = backend->now();
        if (!final_content) {
          rec.ended_by = EndedBy::failure;
          rec.detail = "output write failed on " + system.id;
          return finish_slot(rec, rec.detail);
        }
        content_ = std::move(*final_content);
        rec.ended_by = EndedBy::completion;
        rec.progress_delta = app_.work_total - workload::to_work(ticks_before, app_.work_total);
        finish_slot(rec);
        return complete(system.id);
      }

      case MonitorStatus::guard_fired: {
        if (!app_.checkpointable) {
          cluster::stop(cluster, *backend);
          rec.ended_by = EndedBy::failure;
          rec.detail = "checkpoint unsupported";
          rec.slot_duration_used = backend->now();
          return finish_slot(rec, "checkpoint unsupported");
        }
        rec.checkpoint_started_s = backend->now();
        try {
          auto taken = checkpoint_now(st, cluster, *backend, app_, checkpoints_, result_.run_id, next_seq_, clock_);
          ++next_seq_;
          rec.checkpoint_s = taken.duration;
          content_ = std::move(taken.content);
          last_checkpoint_ = taken.checkpoint;
        } catch (const CheckpointWriteError& e) {
          cluster::stop(cluster, *backend);
          rec.ended_by = EndedBy::failure;
          rec.detail = e.what();
          rec.slot_duration_used = backend->now();
          return finish_slot(rec, std::string(e.what()));
        }
        cluster::stop(cluster, *backend);
        rec.ended_by = EndedBy::timeslot_checkpoint;
        rec.progress_delta = workload::to_work(workload::progress_ticks(content_), app_.work_total) -
                             workload::to_work(ticks_before, app_.work_total);
        rec.slot_duration_used = backend->now();
        return finish_slot(rec);
      }
    }
    return std::nullopt;
  }

  /// Records the slot; with a fatal error the workflow ends failed.
  std::optional<RunResult> finish_slot(const SlotRecord& rec, std::optional<std::string> fatal = std::nullopt) {
    auto& st = result_.state;
    clock_ += rec.slot_duration_used;
    if (volumes_.get(live_id_).location != kDetached) volumes_.detach(live_id_);
    result_.history.push_back(rec);
    st.slots_consumed = static_cast<int>(result_.history.size());
    st.progress = workload::to_work(workload::progress_ticks(content_), app_.work_total);
    if (fatal) {
      st.phase = RunPhase::failed;
      result_.outcome = Outcome::failed;
      result_.error = *fatal;
      persist(true);
      return result_;
    }
    persist();
    return std::nullopt;
  }

  RunResult complete(const std::string& system_id) {
    auto& st = result_.state;
    volumes_.write(live_id_, content_);
    const auto output_id = result_.run_id + "-output";
    if (volumes_.exists(output_id)) volumes_.remove(output_id);
    result_.output_volume = volumes_.create(output_id, content_, system_id);
    st.phase = RunPhase::complete;
    st.progress = app_.work_total;
    result_.outcome = Outcome::completed;
    persist(true);
    return result_;
  }

  RunResult stall() {
    auto& st = result_.state;
    if (!last_checkpoint_) {
      const double progress = workload::to_work(workload::progress_ticks(content_), app_.work_total);
      last_checkpoint_ = checkpoints_.write(result_.run_id, next_seq_++, progress,
                                            st.current_system.value_or(kDetached), clock_, content_);
    }
    result_.checkpoint_manifest = last_checkpoint_->manifest_path();
    st.phase = RunPhase::stalled;
    result_.outcome = Outcome::stalled_with_checkpoint;
    persist(true);
    return result_;
  }

  void persist(bool final = false) {
    json j = result_;
    if (!final) j["outcome"] = nullptr;
    const auto path = state_path(options_.store, result_.run_id);
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    write_json_file(tmp, j);
    std::filesystem::rename(tmp, path);
  }

  const ResourcePool& pool_;
  const AppSpec& app_;
  const HardwareConfig& uconf_;
  const BackendFactory& factory_;
  const WorkflowOptions& options_;
  storage::VolumeStore volumes_;
  storage::CheckpointStore checkpoints_;
  const std::int64_t total_ticks_;

  RunResult result_;
  Bytes content_;
  std::string live_id_;
  std::optional<storage::Checkpoint> last_checkpoint_;
  int next_seq_ = 0;
  double clock_ = 0.0;  // simulated seconds since the workflow started
};

}  // namespace

RunResult run_workflow(const ResourcePool& pool, const AppSpec& app, const DataVolume& data,
                       const HardwareConfig& uconf, const BackendFactory& factory, const WorkflowOptions& options) {
  if (options.store.empty()) throw Error("workflow needs a store directory");
  const auto report = validate(pool, app, uconf);
  if (!report.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : report) msg += " " + v.field + " (" + v.rule + ");";
    throw Error(msg);
  }
  Workflow workflow(pool, app, uconf, factory, options);
  return workflow.run(data);
}

}  // namespace bee::orchestrator
