#pragma once

// Backend abstraction. A backend provisions nodes on the hosts of one compute
// system, runs the container layer and the application, and exposes a clock.
// Simulated backends keep logical time; the local-process backend runs real
// agent processes and maps wall time onto simulated seconds.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bee/json_io.hpp"
#include "bee/model.hpp"
#include "bee/storage.hpp"
#include "bee/topology.hpp"

namespace bee {

enum class BackendKind { sim, sim_hpc, local, sim_cloud_aws, sim_cloud_baremetal };

std::string to_string(BackendKind kind);
BackendKind parse_backend_kind(const std::string& text);

/// Injected failure, matched against system id and host id ("" matches any).
struct Fault {
  enum class Kind { deploy_step, node_failure, transfer_corrupt, checkpoint_write };
  Kind kind = Kind::deploy_step;
  std::string system;
  std::string host;
  std::string action;  // deploy_step: step name such as "img_build"
  double at_s = 0.0;   // node_failure: slot-relative time
  int count = 1;       // transfer_corrupt: number of corrupted transfers

  bool operator==(const Fault&) const = default;
};

struct BackendConfig {
  BackendKind kind = BackendKind::sim;
  std::uint64_t seed = 0;
  std::optional<double> cpu_overhead_fraction;  // default depends on the backend
  double hop_latency_ms = 1.0;
  double poll_interval_s = 1.0;

  // Deployment cost model of the simulated backends (seconds).
  double vm_create_s = 2.0;
  double image_create_s = 5.0;
  double configure_s = 1.0;
  double shared_vol_s = 1.0;
  double network_s = 1.0;
  double register_s = 0.0;
  double vm_boot_s = 20.0;
  double vm_boot_jitter_s = 5.0;
  double container_create_s = 0.5;
  double image_size_mb = 200.0;
  double build_step_s = 15.0;
  int build_steps = 4;
  double container_start_s = 1.0;
  double app_start_s = 1.0;

  // Scaling study.
  std::uint64_t message_bytes = 1 << 20;
  int sends_per_process = 64;

  // Local-process backend: wall seconds per simulated second.
  double time_scale = 0.01;

  std::vector<Fault> faults;

  bool operator==(const BackendConfig&) const = default;
};

void to_json(json& j, const Fault& f);
void from_json(const json& j, Fault& f);
void to_json(json& j, const BackendConfig& c);
void from_json(const json& j, BackendConfig& c);

struct PerfModel {
  double cpu_overhead_fraction = 0.0;
  double net_bandwidth = 0.0;  // MB/s
  DiskBandwidth disk;
  double hop_latency_s = 0.001;
  bool flat_network = false;  // provider network: every pair one hop, no relays
};

struct BackendCapability {
  bool has_vm_layer = true;
  bool native_shared_fs = false;
  std::set<NetworkSolution> topology_choices;
  PerfModel perf;
};

void to_json(json& j, const BackendCapability& c);

/// Seconds to run `work` units on `cores` cores.
double sim_compute(double work, int cores, double cpu_rate_native, double cpu_overhead_fraction);

struct SimEvent {
  double t = 0.0;
  std::string kind;
  std::string node;
  std::string detail;

  bool operator==(const SimEvent&) const = default;
};

void to_json(json& j, const SimEvent& e);

enum class NodeRole { master, worker };

struct NodeHandle {
  int index = 0;
  std::string host_id;
  std::string vm_id;      // empty without a VM layer
  std::string docker_id;
  NodeRole role = NodeRole::worker;
  int ssh_forward_port = 0;
  std::string mpi_vnic_addr;
  std::vector<std::string> vm_addresses;
  // Container layer, realised as properties of the node.
  std::string container_image;
  std::vector<std::string> container_addresses;
  std::map<std::string, std::string> volume_mounts;  // container path -> node path
  std::string shared_volume;  // host-level mount registered for this node

  bool operator==(const NodeHandle&) const = default;
};

void to_json(json& j, const NodeHandle& n);

/// Overlay (MPI vNIC) address of node `index`.
std::string overlay_address(int index);
/// Address of the NAT'd first vNIC, identical on every VM.
inline constexpr const char* kSshVnicAddress = "10.0.2.15";

enum class VmStep { create_vm, create_img, configure, setup_shared_vol, setup_network, register_vm };
enum class ContainerStep { create_docker, img_pull, img_build, register_docker };

std::string to_string(VmStep step);
std::string to_string(ContainerStep step);

struct OpResult {
  bool ok = true;
  double duration = 0.0;
  std::string cause;
};

struct ProvisionRequest {
  std::string cluster;
  HardwareConfig uconf;
  std::string base_image;
  storage::StoragePlan plan;
};

struct AppLaunch {
  std::int64_t start_ticks = 0;
  std::int64_t total_ticks = 0;
  int cores = 1;
  double io_seconds = 0.0;
};

struct ProgressReport {
  std::int64_t ticks = 0;
  bool node_failed = false;
  std::string failed_host;
};

struct TransferResult {
  Bytes delivered;
  double duration = 0.0;
};

/// Per-host bookkeeping of forwarded ports, VMs and mounted volumes.
class HostRegistry {
 public:
  /// Lowest free port >= base on that host.
  int allocate_port(const std::string& host, int base);
  void release_port(const std::string& host, int port);
  void register_vm(const std::string& host, const std::string& vm);
  void unregister_vm(const std::string& host, const std::string& vm);
  void mount(const std::string& host, const std::string& volume);
  void unmount(const std::string& host, const std::string& volume);

  bool empty() const;
  std::set<int> ports(const std::string& host) const;
  std::set<std::string> vms(const std::string& host) const;
  std::set<std::string> mounts(const std::string& host) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::set<int>> ports_;
  std::map<std::string, std::set<std::string>> vms_;
  std::map<std::string, std::set<std::string>> mounts_;
};

class Backend {
 public:
  Backend(BackendConfig config, ComputeSystem system);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  virtual BackendCapability capability() const = 0;

  virtual double now() const = 0;
  virtual void advance_to(double t) = 0;

  // Per-host operations may be called concurrently for different nodes.
  virtual OpResult vm_step(VmStep step, NodeHandle& node, const ProvisionRequest& request, double at) = 0;
  virtual std::vector<OpResult> start_vms(std::span<NodeHandle> nodes, const net::Topology& topology,
                                          int parallelism, double at) = 0;
  virtual OpResult container_step(ContainerStep step, NodeHandle& node, const AppSpec& app, double at) = 0;
  virtual std::vector<OpResult> start_containers(std::span<NodeHandle> nodes, int parallelism, double at) = 0;
  virtual OpResult exec(const NodeHandle& node, const std::vector<std::string>& argv, double at) = 0;

  virtual OpResult start_app(const NodeHandle& master, const AppLaunch& launch, double at) = 0;
  virtual ProgressReport progress(const NodeHandle& master) = 0;
  virtual void pause(std::span<const NodeHandle> nodes) = 0;
  virtual void resume(std::span<const NodeHandle> nodes) = 0;
  /// Releases every node resource.
  virtual void stop(std::span<const NodeHandle> nodes) = 0;

  virtual OpResult put_volume(const NodeHandle& node, const Bytes& content) = 0;
  /// Volume content including the application state; nullopt if the write fails.
  virtual std::optional<Bytes> fetch_volume(const NodeHandle& node) = 0;

  /// Moves a checkpoint from a system with `from_bandwidth` MB/s onto this one.
  virtual TransferResult transfer(const Bytes& payload, double from_bandwidth);

  /// Runs every VM step for one node.
  OpResult provision(NodeHandle& node, const ProvisionRequest& request, double at);

  double cpu_overhead_fraction() const;
  const ComputeSystem& system() const { return system_; }
  const BackendConfig& config() const { return config_; }
  HostRegistry& registry() { return registry_; }
  const HostRegistry& registry() const { return registry_; }
  /// Event log ordered by (t, node, per-node sequence).
  std::vector<SimEvent> events() const;

  void log(double t, const std::string& kind, const std::string& node, const std::string& detail = {});

 protected:
  /// A deploy_step fault for this system/host/action, if configured.
  std::optional<std::string> deploy_fault(const std::string& host, const std::string& action) const;
  bool corrupt_next_transfer();
  bool checkpoint_write_fails() const;
  std::optional<Fault> node_failure(const std::string& host) const;

  BackendConfig config_;
  ComputeSystem system_;
  HostRegistry registry_;

 private:
  struct Logged {
    SimEvent event;
    long seq;
  };
  mutable std::mutex log_mutex_;
  std::vector<Logged> log_;
  std::map<std::string, long> node_seq_;
  int transfers_corrupted_ = 0;
};

using BackendFactory = std::function<std::unique_ptr<Backend>(const ComputeSystem&)>;

/// Backend for `system` under `config`; kind `sim` picks the simulated
/// variant matching the system kind.
std::unique_ptr<Backend> make_backend(const BackendConfig& config, const ComputeSystem& system,
                                      const std::filesystem::path& workdir = {});

BackendFactory backend_factory(BackendConfig config, std::filesystem::path workdir = {});

}  // namespace bee
