#pragma once

// Cross-system workflow: take the highest-priority system, restore the
// latest checkpoint (or load the input), deploy, monitor until completion or
// until the time slot is nearly spent, then checkpoint and move on. When the
// pool runs out the last checkpoint is kept and the run stalls.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bee/backend.hpp"
#include "bee/cluster.hpp"
#include "bee/storage.hpp"

namespace bee::orchestrator {

enum class Outcome { completed, stalled_with_checkpoint, failed };
enum class EndedBy { completion, timeslot_checkpoint, failure };

std::string to_string(Outcome outcome);
std::string to_string(EndedBy ended_by);
Outcome parse_outcome(const std::string& text);
EndedBy parse_ended_by(const std::string& text);

struct SlotRecord {
  std::string system_id;
  double slot_duration_used = 0.0;
  double progress_delta = 0.0;
  EndedBy ended_by = EndedBy::completion;
  double transfer_s = 0.0;
  double deploy_s = 0.0;
  double guard_s = 0.0;
  double checkpoint_started_s = 0.0;  // slot-relative; 0 when no checkpoint was taken
  double checkpoint_s = 0.0;
  std::string detail;

  bool operator==(const SlotRecord&) const = default;
};

void to_json(json& j, const SlotRecord& r);
void from_json(const json& j, SlotRecord& r);

struct RunResult {
  std::string run_id;
  Outcome outcome = Outcome::failed;
  std::optional<DataVolume> output_volume;
  std::vector<SlotRecord> history;
  RunState state;
  std::optional<std::filesystem::path> checkpoint_manifest;  // set when stalled
  std::string error;
};

void to_json(json& j, const RunResult& r);
void from_json(const json& j, RunResult& r);

struct WorkflowOptions {
  std::filesystem::path store;
  bool loop_pool = false;
  std::uint64_t seed = 0;
  std::string run_id;  // empty: derived from the inputs and the seed
  double poll_interval_s = 1.0;
  std::optional<storage::Checkpoint> resume_from;
  int parallelism = 0;
};

/// Guard window: max(2 x estimated checkpoint seconds, 5% of the slot).
double guard_window(double time_slot, double estimated_checkpoint_s);

/// Deterministic run id: app name plus a hash of the inputs and seed.
std::string derive_run_id(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf,
                          const DataVolume& data, std::uint64_t seed);

enum class MonitorStatus { completed, guard_fired, failed };
std::string to_string(MonitorStatus status);

struct MonitorResult {
  MonitorStatus status = MonitorStatus::failed;
  std::int64_t ticks = 0;
  double t = 0.0;  // backend time when monitoring returned
  std::string failed_host;
};

/// Polls every `poll_interval` simulated seconds. Returns guard_fired at the
/// first poll with elapsed >= budget - guard; the last poll is clamped to
/// that instant, so polling never runs past the budget.
MonitorResult monitor(const cluster::ClusterState& cluster, Backend& backend, double budget, double guard,
                      std::int64_t total_ticks, double poll_interval = 1.0);

struct CheckpointTaken {
  storage::Checkpoint checkpoint;
  Bytes content;
  double duration = 0.0;
};

class CheckpointWriteError : public Error {
 public:
  using Error::Error;
};

/// Pauses the cluster, snapshots the master's volume and stores it as
/// checkpoint `seq`. Throws Error("checkpoint unsupported") for apps that
/// cannot checkpoint and CheckpointWriteError if the snapshot fails.
CheckpointTaken checkpoint_now(RunState& run, cluster::ClusterState& cluster, Backend& backend, const AppSpec& app,
                               storage::CheckpointStore& store, const std::string& run_id, int seq,
                               double created_at);

struct Restored {
  DataVolume volume;
  Bytes content;
  double duration = 0.0;
  int attempts = 0;
};

class TransferError : public Error {
 public:
  using Error::Error;
};

/// Moves the checkpoint content onto `to`'s backend and verifies its digest,
/// retrying once. `from` may be null when the origin is not in the pool.
Restored transfer_and_restore(const storage::Checkpoint& checkpoint, const Bytes& content,
                              const ComputeSystem* from, Backend& to);

/// Runs the workflow. The input content is read from the volume store under
/// options.store. Persists `<store>/<run_id>/state.json` after every slot.
RunResult run_workflow(const ResourcePool& pool, const AppSpec& app, const DataVolume& data,
                       const HardwareConfig& uconf, const BackendFactory& factory, const WorkflowOptions& options);

/// Path of the persisted state snapshot for a run.
std::filesystem::path state_path(const std::filesystem::path& store, const std::string& run_id);

}  // namespace bee::orchestrator
