#pragma once

// Shared-storage models and the on-disk volume and checkpoint stores.
//
// Two designs are modelled:
//  * data_image_nfs: a data image mounted on the master only and re-exported
//    to the workers over NFS. The master sees native disk bandwidth; the
//    workers share one NFS ceiling, so their aggregate throughput is flat in
//    the node count.
//  * virtio_passthrough: a host directory mapped into every VM. Reads run at
//    native speed, writes at 90% of native.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bee/json_io.hpp"
#include "bee/model.hpp"

namespace bee::storage {

inline constexpr double kVirtioWriteFactor = 0.9;
inline constexpr double kDefaultNfsCap = 125.0;

enum class IoOp { read, write };

struct StoragePlan {
  StorageSolution solution = StorageSolution::virtio_passthrough;
  std::optional<int> master_node = 0;
  std::string mount_path = "/bee/data";
  double native_read = 0.0;   // MB/s, per node
  double native_write = 0.0;  // MB/s, per node
  double nfs_cap = kDefaultNfsCap;
  bool native_shared_fs = false;  // provider file system (cloud backends): native both ways

  bool operator==(const StoragePlan&) const = default;
};

void to_json(json& j, const StoragePlan& p);
void from_json(const json& j, StoragePlan& p);

/// Throws Error if the plan invariants do not hold.
void check_plan(const StoragePlan& plan);

StoragePlan make_plan(StorageSolution solution, const ComputeSystem& system, bool native_shared_fs = false);

/// MB/s seen by `node` while `active_workers` NFS clients are busy
/// (default: every worker, n_nodes - 1).
double effective_bandwidth(const StoragePlan& plan, int node, IoOp op, int n_nodes,
                           std::optional<int> active_workers = std::nullopt);

/// Simulated seconds to move `bytes` for one node.
double model_io(const StoragePlan& plan, int node, IoOp op, std::uint64_t bytes, int n_nodes,
                std::optional<int> active_workers = std::nullopt);

/// One row of an IOR-style run: every node writes `bytes_per_node` and then
/// reads a file written by another node, all nodes concurrently.
struct IoBenchRow {
  int n_nodes = 0;
  double master_write = 0.0;  // MB/s per node
  double master_read = 0.0;
  double worker_write = 0.0;
  double worker_read = 0.0;
  double worker_aggregate_write = 0.0;
  double worker_aggregate_read = 0.0;
  double aggregate_write = 0.0;
  double aggregate_read = 0.0;
};

void to_json(json& j, const IoBenchRow& r);

std::vector<IoBenchRow> io_bench(const StoragePlan& plan, int max_nodes,
                                 std::uint64_t bytes_per_node = 1ull << 30);

struct Snapshot {
  std::string volume_id;
  Bytes content;
  std::string digest;
};

/// Volumes under `<root>/volumes/<id>/{meta.json,data.bin}`; the digest is
/// the SHA-256 of data.bin. Operations on one store are serialized.
class VolumeStore {
 public:
  explicit VolumeStore(std::filesystem::path root);

  DataVolume create(const std::string& id, const Bytes& content, const std::string& location = kDetached);
  bool exists(const std::string& id) const;
  DataVolume get(const std::string& id) const;
  /// Content, verified against the recorded digest.
  Bytes read(const std::string& id) const;
  DataVolume write(const std::string& id, const Bytes& content);
  DataVolume attach(const std::string& id, const std::string& location);
  DataVolume detach(const std::string& id);
  void set_io_active(const std::string& id, bool active);
  Snapshot snapshot(const std::string& id) const;
  void remove(const std::string& id);

  std::filesystem::path dir(const std::string& id) const { return root_ / "volumes" / id; }

 private:
  struct Meta {
    DataVolume volume;
    bool io_active = false;
  };
  Meta load(const std::string& id) const;
  void save(const Meta& meta) const;

  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

struct Checkpoint {
  std::string run_id;
  int seq = 0;
  double progress = 0.0;
  std::string digest;
  std::string origin_system;
  double created_at = 0.0;  // simulated seconds since the workflow started
  std::uint64_t byte_size = 0;
  std::filesystem::path dir;

  std::filesystem::path manifest_path() const { return dir / "manifest.json"; }
  std::filesystem::path volume_path() const { return dir / "volume.bin"; }
};

class CorruptCheckpoint : public Error {
 public:
  using Error::Error;
};

/// Checkpoints under `<root>/<run_id>/<seq>/{manifest.json,volume.bin}`.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root) : root_(std::move(root)) {}

  Checkpoint write(const std::string& run_id, int seq, double progress, const std::string& origin_system,
                   double created_at, const Bytes& content);
  std::optional<Checkpoint> latest(const std::string& run_id) const;
  const std::filesystem::path& root() const { return root_; }

  /// Accepts a checkpoint directory or its manifest.json.
  static Checkpoint load(const std::filesystem::path& path);
  /// Throws CorruptCheckpoint if volume.bin does not match the manifest digest.
  static Bytes read_verified(const Checkpoint& checkpoint);

 private:
  std::filesystem::path root_;
};

json manifest_json(const Checkpoint& c);

}  // namespace bee::storage
