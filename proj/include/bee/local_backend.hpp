#pragma once

// Local-process backend. Each node is one bee-agent process; the agents form
// the overlay over loopback sockets and run the toy work loop. Wall time is
// mapped onto simulated seconds through config.time_scale.

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <set>

#include "bee/backend.hpp"
#include "bee/local_network.hpp"

namespace bee {

class LocalBackend : public Backend {
 public:
  /// An empty workdir means a private temporary directory, removed on destruction.
  LocalBackend(BackendConfig config, ComputeSystem system, std::filesystem::path workdir = {});
  ~LocalBackend() override;

  BackendCapability capability() const override;
  double now() const override;
  void advance_to(double t) override;

  OpResult vm_step(VmStep step, NodeHandle& node, const ProvisionRequest& request, double at) override;
  std::vector<OpResult> start_vms(std::span<NodeHandle> nodes, const net::Topology& topology, int parallelism,
                                  double at) override;
  OpResult container_step(ContainerStep step, NodeHandle& node, const AppSpec& app, double at) override;
  std::vector<OpResult> start_containers(std::span<NodeHandle> nodes, int parallelism, double at) override;
  OpResult exec(const NodeHandle& node, const std::vector<std::string>& argv, double at) override;

  OpResult start_app(const NodeHandle& master, const AppLaunch& launch, double at) override;
  ProgressReport progress(const NodeHandle& master) override;
  void pause(std::span<const NodeHandle> nodes) override;
  void resume(std::span<const NodeHandle> nodes) override;
  void stop(std::span<const NodeHandle> nodes) override;

  OpResult put_volume(const NodeHandle& node, const Bytes& content) override;
  std::optional<Bytes> fetch_volume(const NodeHandle& node) override;

  const std::filesystem::path& workdir() const { return workdir_; }
  /// The running overlay, or nullptr before start_vms.
  net::LocalNetwork* network() { return network_.get(); }

 private:
  using Clock = std::chrono::steady_clock;
  double elapsed_since(Clock::time_point start) const;
  std::filesystem::path node_dir(const NodeHandle& node) const;
  OpResult control_ok(const NodeHandle& node, const json& request);

  std::filesystem::path workdir_;
  bool owns_workdir_ = false;
  Clock::time_point epoch_;
  // While the app is paused or stopped the clock only moves by advance_to.
  mutable std::mutex clock_mutex_;
  std::optional<double> frozen_at_;
  void freeze();
  void thaw();
  std::string cluster_ = "cluster";
  std::unique_ptr<net::LocalNetwork> network_;
  std::mutex mutex_;  // guards the control channels and node bookkeeping
  std::map<int, std::string> running_;  // node index -> host
};

}  // namespace bee
