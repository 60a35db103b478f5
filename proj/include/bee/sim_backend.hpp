#pragma once

// Deterministic simulated backends. Every operation duration is a pure
// function of (seed, host, operation); time is logical and only moves
// forward when the caller advances the clock.

#include <map>
#include <set>

#include "bee/backend.hpp"

namespace bee {

enum class SimFlavor { hpc, cloud_aws, cloud_baremetal };

class SimBackend : public Backend {
 public:
  SimBackend(BackendConfig config, ComputeSystem system, SimFlavor flavor = SimFlavor::hpc);

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

  SimFlavor flavor() const { return flavor_; }

 private:
  /// Uniform [0, 1) draw keyed by (seed, host, operation).
  double draw(const std::string& host, const std::string& op) const;
  /// Duration of `base` seconds with up to +20% seeded jitter.
  double jittered(double base, const std::string& host, const std::string& op) const;
  std::int64_t ticks_at(double t) const;
  std::vector<OpResult> start_batched(std::span<NodeHandle> nodes, int parallelism, double at,
                                      const std::string& action, double base);

  SimFlavor flavor_;
  mutable std::mutex mutex_;
  double now_ = 0.0;
  std::map<std::string, Bytes> volumes_;  // per host
  std::set<std::string> running_hosts_;

  struct App {
    bool started = false;
    double begin = 0.0;  // simulated time at which the work loop starts
    std::int64_t start_ticks = 0;
    std::int64_t total_ticks = 0;
    double rate = 0.0;  // work-units per simulated second
    bool paused = false;
    double paused_at = 0.0;
    double paused_total = 0.0;
  } app_;
};

}  // namespace bee
