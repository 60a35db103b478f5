#pragma once

// Shared domain types: compute systems, the resource pool, the application
// descriptor, the user hardware config and the live run state.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bee {

using Bytes = std::vector<std::uint8_t>;

/// Bytes per MB in every bandwidth figure (MB/s is MiB/s throughout).
inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

/// Base error for everything the engine reports by exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SystemKind { hpc, cloud_aws_like, cloud_baremetal_like };
enum class NetworkSolution { multicast, p2p_star, p2p_tree };
enum class StorageSolution { data_image_nfs, virtio_passthrough };

struct Host {
  std::string id;

  bool operator==(const Host&) const = default;
};

struct DiskBandwidth {
  double read = 0.0;   // MB/s
  double write = 0.0;  // MB/s

  bool operator==(const DiskBandwidth&) const = default;
};

struct ComputeSystem {
  std::string id;
  SystemKind kind = SystemKind::hpc;
  std::vector<Host> hosts;
  double time_slot = 0.0;  // seconds
  bool kvm_available = true;
  bool host_file_sharing = true;
  double net_bandwidth_native = 0.0;  // MB/s
  DiskBandwidth disk_bandwidth_native;
  double cpu_rate_native = 0.0;  // work-units/s per core
  double nfs_cap = 125.0;        // MB/s, shared by NFS workers

  bool operator==(const ComputeSystem&) const = default;
};

/// Systems in priority order; front() is tried first.
struct ResourcePool {
  std::vector<ComputeSystem> systems;

  const ComputeSystem* find(const std::string& id) const;
  bool operator==(const ResourcePool&) const = default;
};

struct ImageRef {
  std::string ref;
  bool operator==(const ImageRef&) const = default;
};

struct Buildfile {
  std::string path;
  bool operator==(const Buildfile&) const = default;
};

using ContainerSource = std::variant<ImageRef, Buildfile>;

struct CommPattern {
  enum class Kind { all_to_all, one_to_one_heavy, mixed };
  Kind kind = Kind::all_to_all;
  double ratio = 0.0;  // fraction of one-to-one sends, only meaningful for mixed

  /// Fraction of logical sends that are point-to-point.
  double one_to_one_fraction() const;
  bool operator==(const CommPattern&) const = default;
};

struct IoProfile {
  std::uint64_t read_bytes_per_slot = 0;
  std::uint64_t write_bytes_per_slot = 0;

  bool operator==(const IoProfile&) const = default;
};

struct AppSpec {
  std::string name;
  ContainerSource container_source = ImageRef{};
  std::vector<std::string> entry_command;
  int process_count = 1;
  CommPattern comm_pattern;
  double work_total = 0.0;
  IoProfile io_profile;
  bool checkpointable = true;

  bool operator==(const AppSpec&) const = default;
};

struct HardwareConfig {
  int vcpus = 1;
  int ram_mb = 1024;
  NetworkSolution network_solution = NetworkSolution::p2p_tree;
  StorageSolution storage_solution = StorageSolution::virtio_passthrough;
  int ssh_base_port = 10022;

  bool operator==(const HardwareConfig&) const = default;
};

/// Location value for a volume that is mounted nowhere.
inline constexpr const char* kDetached = "detached";

struct DataVolume {
  std::string id;
  std::uint64_t byte_size = 0;
  std::string content_digest;
  std::string location = kDetached;

  bool operator==(const DataVolume&) const = default;
};

enum class RunPhase { init, deploying, running, checkpointing, migrating, stalled, complete, failed };

struct RunState {
  RunPhase phase = RunPhase::init;
  std::optional<std::string> current_system;
  std::optional<std::string> last_host_system;
  bool need_migration = false;
  double progress = 0.0;
  int slots_consumed = 0;

  bool operator==(const RunState&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

/// Checks every type invariant plus placement feasibility (one application
/// node per host). Never throws; an empty report means valid.
ValidationReport validate(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf);

ValidationReport validate_system(const ComputeSystem& system, const std::string& field_prefix);
ValidationReport validate_app(const AppSpec& app);
ValidationReport validate_uconf(const HardwareConfig& uconf);

/// Throws Error listing every violation when the state invariants fail.
void check_run_state(const RunState& state, double work_total);

std::string to_string(SystemKind kind);
std::string to_string(NetworkSolution solution);
std::string to_string(StorageSolution solution);
std::string to_string(RunPhase phase);
std::string to_string(CommPattern::Kind kind);

SystemKind parse_system_kind(const std::string& text);
NetworkSolution parse_network_solution(const std::string& text);
StorageSolution parse_storage_solution(const std::string& text);
RunPhase parse_run_phase(const std::string& text);
CommPattern::Kind parse_comm_pattern_kind(const std::string& text);

}  // namespace bee
