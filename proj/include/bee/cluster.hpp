#pragma once

// Cluster deployment in four stages: cluster init, VM layer, container layer,
// application start. Per-host work inside a stage runs in parallel and is
// joined before the next stage. Any failure tears the cluster down.

#include <optional>
#include <string>
#include <vector>

#include "bee/backend.hpp"
#include "bee/storage.hpp"
#include "bee/topology.hpp"

namespace bee::cluster {

enum class Status { defined, vm_layer_up, docker_layer_up, app_running, paused, stopped };

std::string to_string(Status status);
bool legal_transition(Status from, Status to);

struct DeployEvent {
  double t = 0.0;
  int stage = 0;
  std::string host;
  std::string action;
  bool ok = true;

  bool operator==(const DeployEvent&) const = default;
};

void to_json(json& j, const DeployEvent& e);
void from_json(const json& j, DeployEvent& e);

struct ClusterState {
  std::string name;
  std::vector<Host> hosts;
  std::vector<NodeHandle> nodes;  // nodes[0] is the master
  net::Topology topology;
  storage::StoragePlan storage_plan;
  Status status = Status::defined;
  std::vector<DeployEvent> events;  // ordered by stage, then time, then host

  const NodeHandle& master() const;
  /// Throws Error naming the current status on an illegal move.
  void transition(Status to);
};

/// Everything but the event log.
void to_json(json& j, const ClusterState& c);
/// One JSON object per line: {t, stage, host, action, ok}.
std::string event_log_ndjson(const ClusterState& c);

enum class RecipeStepKind {
  create_user_accounts,
  configure_network_interfaces,
  configure_ssh,
  install_packages,
  configure_proxy,
  configure_shared_storage
};

std::string to_string(RecipeStepKind kind);
RecipeStepKind parse_recipe_step_kind(const std::string& text);

struct RecipeStep {
  RecipeStepKind kind = RecipeStepKind::create_user_accounts;
  std::vector<std::string> packages;  // install_packages only

  bool operator==(const RecipeStep&) const = default;
};

struct ImageRecipe {
  std::string base_os = "ubuntu-16.04";
  std::vector<RecipeStep> steps;             // offline, baked into the image
  std::vector<RecipeStep> boot_time_script;  // run when the VM boots

  bool operator==(const ImageRecipe&) const = default;
};

void to_json(json& j, const RecipeStep& s);
void from_json(const json& j, RecipeStep& s);
void to_json(json& j, const ImageRecipe& r);
void from_json(const json& j, ImageRecipe& r);

/// Empty when every step kind appears exactly once and network interfaces
/// are configured offline (the step installs the boot-time hook).
std::vector<std::string> recipe_problems(const ImageRecipe& recipe);

/// All six steps offline, with the usual HPC package set.
ImageRecipe default_recipe();

struct BuildLogEntry {
  std::string step;
  double cost_s = 0.0;
};

struct ImageBuild {
  std::string image_id;
  std::string content_digest;  // of the canonical recipe
  std::vector<BuildLogEntry> log;
  double duration = 0.0;
};

/// Offline build. Throws Error("recipe invalid: ...") when the recipe breaks
/// its invariant. Equal recipes give equal ids and digests.
ImageBuild build_image(const ImageRecipe& recipe, Backend& backend);

/// Lowest free port >= base_port on `host`, registered there.
int allocate_ssh_forward(HostRegistry& registry, const std::string& host, int base_port);

class DeployError : public Error {
 public:
  DeployError(int stage, std::string host, std::string cause, ClusterState state);
  int stage() const { return stage_; }
  const std::string& host() const { return host_; }
  const std::string& cause() const { return cause_; }
  /// The torn-down cluster (status stopped).
  const ClusterState& state() const { return state_; }

 private:
  int stage_;
  std::string host_;
  std::string cause_;
  ClusterState state_;
};

struct DeployOptions {
  std::string base_image;  // empty: the default recipe's image
  int parallelism = 0;     // concurrent VM/container starts, 0 = all at once
  std::optional<AppLaunch> launch;  // default: from scratch on every process
  const Bytes* volume = nullptr;    // staged on the master before the app starts
};

/// One node per host; hosts[0] becomes the master. Returns the cluster in
/// app_running. Throws DeployError after tearing down on any failure.
ClusterState deploy_cluster(const std::vector<Host>& hosts, const AppSpec& app, const std::string& cname,
                            const HardwareConfig& uconf, Backend& backend, const DeployOptions& options = {});

void pause(ClusterState& cluster, Backend& backend);
void resume(ClusterState& cluster, Backend& backend);
/// Releases every node handle, port and volume registration.
void stop(ClusterState& cluster, Backend& backend);

}  // namespace bee::cluster
