#include "bee/cluster.hpp"

#include <algorithm>
#include <map>

#include "bee/agent.hpp"
#include "bee/digest.hpp"
#include "bee/parallel.hpp"
#include "bee/workload.hpp"

namespace bee::cluster {

std::string to_string(Status status) {
  switch (status) {
    case Status::defined: return "defined";
    case Status::vm_layer_up: return "vm_layer_up";
    case Status::docker_layer_up: return "docker_layer_up";
    case Status::app_running: return "app_running";
    case Status::paused: return "paused";
    case Status::stopped: return "stopped";
  }
  return "?";
}

bool legal_transition(Status from, Status to) {
  switch (to) {
    case Status::vm_layer_up: return from == Status::defined;
    case Status::docker_layer_up: return from == Status::vm_layer_up;
    case Status::app_running: return from == Status::docker_layer_up || from == Status::paused;
    case Status::paused: return from == Status::app_running;
    case Status::stopped: return from != Status::stopped;
    case Status::defined: return false;
  }
  return false;
}

void to_json(json& j, const DeployEvent& e) {
  j = json{{"t", e.t}, {"stage", e.stage}, {"host", e.host}, {"action", e.action}, {"ok", e.ok}};
}

void from_json(const json& j, DeployEvent& e) {
  e.t = j.at("t").get<double>();
  e.stage = j.at("stage").get<int>();
  e.host = j.at("host").get<std::string>();
  e.action = j.at("action").get<std::string>();
  e.ok = j.at("ok").get<bool>();
}

const NodeHandle& ClusterState::master() const {
  if (nodes.empty()) throw Error("cluster '" + name + "' has no nodes");
  return nodes.front();
}

void ClusterState::transition(Status to) {
  if (!legal_transition(status, to))
    throw Error("cluster '" + name + "' is " + cluster::to_string(status) + ", cannot move to " +
                cluster::to_string(to));
  status = to;
}

void to_json(json& j, const ClusterState& c) {
  j = json{{"cname", c.name},      {"hosts", c.hosts},
           {"nodes", c.nodes},     {"topology", c.topology},
           {"storage_plan", c.storage_plan}, {"status", to_string(c.status)}};
}

std::string event_log_ndjson(const ClusterState& c) {
  std::string out;
  for (const auto& e : c.events) out += json(e).dump() + "\n";
  return out;
}

namespace {

constexpr RecipeStepKind kAllSteps[] = {
    RecipeStepKind::create_user_accounts, RecipeStepKind::configure_network_interfaces,
    RecipeStepKind::configure_ssh,        RecipeStepKind::install_packages,
    RecipeStepKind::configure_proxy,      RecipeStepKind::configure_shared_storage};

double step_cost(const RecipeStep& s) {
  switch (s.kind) {
    case RecipeStepKind::create_user_accounts: return 5.0;
    case RecipeStepKind::configure_network_interfaces: return 10.0;
    case RecipeStepKind::configure_ssh: return 5.0;
    case RecipeStepKind::install_packages: return 60.0 + 15.0 * static_cast<double>(s.packages.size());
    case RecipeStepKind::configure_proxy: return 5.0;
    case RecipeStepKind::configure_shared_storage: return 10.0;
  }
  return 0.0;
}

}  // namespace

std::string to_string(RecipeStepKind kind) {
  switch (kind) {
    case RecipeStepKind::create_user_accounts: return "create_user_accounts";
    case RecipeStepKind::configure_network_interfaces: return "configure_network_interfaces";
    case RecipeStepKind::configure_ssh: return "configure_ssh";
    case RecipeStepKind::install_packages: return "install_packages";
    case RecipeStepKind::configure_proxy: return "configure_proxy";
    case RecipeStepKind::configure_shared_storage: return "configure_shared_storage";
  }
  return "?";
}

RecipeStepKind parse_recipe_step_kind(const std::string& text) {
  for (auto k : kAllSteps) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown recipe step '" + text + "'");
}

void to_json(json& j, const RecipeStep& s) {
  j = json{{"kind", to_string(s.kind)}};
  if (s.kind == RecipeStepKind::install_packages) j["packages"] = s.packages;
}

void from_json(const json& j, RecipeStep& s) {
  if (j.is_string()) {
    s.kind = parse_recipe_step_kind(j.get<std::string>());
    s.packages.clear();
    return;
  }
  s.kind = parse_recipe_step_kind(j.at("kind").get<std::string>());
  s.packages = j.value("packages", std::vector<std::string>{});
}

void to_json(json& j, const ImageRecipe& r) {
  j = json{{"base_os", r.base_os}, {"steps", r.steps}, {"boot_time_script", r.boot_time_script}};
}

void from_json(const json& j, ImageRecipe& r) {
  r.base_os = j.value("base_os", std::string("ubuntu-16.04"));
  r.steps = j.at("steps").get<std::vector<RecipeStep>>();
  r.boot_time_script = j.value("boot_time_script", std::vector<RecipeStep>{});
}

std::vector<std::string> recipe_problems(const ImageRecipe& recipe) {
  std::vector<std::string> problems;
  std::map<RecipeStepKind, int> seen;
  for (const auto& s : recipe.steps) ++seen[s.kind];
  for (const auto& s : recipe.boot_time_script) ++seen[s.kind];
  for (auto k : kAllSteps) {
    const int count = seen[k];
    if (count == 0) problems.push_back("missing step " + to_string(k));
    if (count > 1) problems.push_back("duplicate step " + to_string(k));
  }
  const bool offline_network = std::any_of(recipe.steps.begin(), recipe.steps.end(), [](const RecipeStep& s) {
    return s.kind == RecipeStepKind::configure_network_interfaces;
  });
  if (seen[RecipeStepKind::configure_network_interfaces] == 1 && !offline_network)
    problems.push_back("configure_network_interfaces must be baked into the image so the VM is reachable at boot");
  return problems;
}

ImageRecipe default_recipe() {
  ImageRecipe r;
  r.steps = {{RecipeStepKind::create_user_accounts, {}},
             {RecipeStepKind::configure_network_interfaces, {}},
             {RecipeStepKind::configure_ssh, {}},
             {RecipeStepKind::install_packages, {"docker-ce", "openmpi-bin", "nfs-common"}},
             {RecipeStepKind::configure_proxy, {}},
             {RecipeStepKind::configure_shared_storage, {}}};
  return r;
}

ImageBuild build_image(const ImageRecipe& recipe, Backend& backend) {
  const auto problems = recipe_problems(recipe);
  if (!problems.empty()) {
    std::string msg = "recipe invalid:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(msg);
  }
  ImageBuild b;
  b.content_digest = sha256_hex(json(recipe).dump());
  b.image_id = "img-" + b.content_digest.substr(0, 16);
  for (const auto& s : recipe.steps) {
    const double cost = step_cost(s);
    b.log.push_back({to_string(s.kind), cost});
    b.duration += cost;
    backend.log(b.duration, "build_step", b.image_id, to_string(s.kind));
  }
  return b;
}

int allocate_ssh_forward(HostRegistry& registry, const std::string& host, int base_port) {
  if (base_port < 1024 || base_port >= 65535) throw Error("invalid base port " + std::to_string(base_port));
  return registry.allocate_port(host, base_port);
}

DeployError::DeployError(int stage, std::string host, std::string cause, ClusterState state)
    : Error("stage " + std::to_string(stage) + " failed on host " + host + ": " + cause),
      stage_(stage),
      host_(std::move(host)),
      cause_(std::move(cause)),
      state_(std::move(state)) {}

namespace {

struct NodeRun {
  double end = 0.0;
  std::vector<DeployEvent> events;
  std::optional<std::string> failure;
};

void merge_events(ClusterState& c, const std::vector<NodeRun>& runs) {
  std::vector<DeployEvent> events;
  for (const auto& r : runs) events.insert(events.end(), r.events.begin(), r.events.end());
  std::stable_sort(events.begin(), events.end(), [](const DeployEvent& a, const DeployEvent& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.host < b.host;
  });
  c.events.insert(c.events.end(), events.begin(), events.end());
}

[[noreturn]] void fail(ClusterState& c, Backend& backend, int stage, const std::string& host,
                       const std::string& cause) {
  backend.stop(c.nodes);
  c.status = Status::stopped;
  throw DeployError(stage, host, cause, c);
}

/// Checks a per-node result list; on failure tears down naming the first failed host.
void check_stage(ClusterState& c, Backend& backend, int stage, const std::vector<NodeRun>& runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].failure) fail(c, backend, stage, c.nodes[i].host_id, *runs[i].failure);
  }
}

double join(double t, const std::vector<NodeRun>& runs) {
  for (const auto& r : runs) t = std::max(t, r.end);
  return t;
}

std::vector<NodeRun> start_results(const ClusterState& c, const std::vector<OpResult>& results, double t0,
                                   int stage, const std::string& action) {
  std::vector<NodeRun> runs(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    runs[i].end = t0 + results[i].duration;
    runs[i].events.push_back({runs[i].end, stage, c.nodes[i].host_id, action, results[i].ok});
    if (!results[i].ok) runs[i].failure = action + ": " + results[i].cause;
  }
  return runs;
}

std::string mount_source(const storage::StoragePlan& plan, const ClusterState& c, const NodeHandle& node) {
  if (plan.native_shared_fs) return "/shared-fs" + plan.mount_path;
  if (plan.solution == StorageSolution::virtio_passthrough) return "/mnt/virtio" + plan.mount_path;
  if (node.index == plan.master_node.value_or(0)) return "/mnt/data-image";
  return "nfs://" + c.nodes.at(static_cast<std::size_t>(plan.master_node.value_or(0))).mpi_vnic_addr +
         "/mnt/data-image";
}

}  // namespace

ClusterState deploy_cluster(const std::vector<Host>& hosts, const AppSpec& app, const std::string& cname,
                            const HardwareConfig& uconf, Backend& backend, const DeployOptions& options) {
  if (hosts.empty() || static_cast<int>(hosts.size()) < app.process_count)
    throw Error("insufficient hosts: " + std::to_string(hosts.size()) + " for " +
                std::to_string(app.process_count) + " processes");
  const auto cap = backend.capability();
  const int n = static_cast<int>(hosts.size());
  const int parallelism = options.parallelism > 0 ? options.parallelism : n;

  // Stage 1: create the cluster and register every host.
  ClusterState c;
  c.name = cname;
  c.hosts = hosts;
  c.topology = net::build_topology(uconf.network_solution, n);
  c.storage_plan = storage::make_plan(uconf.storage_solution, backend.system(), cap.native_shared_fs);
  double t = backend.now();
  c.events.push_back({t, 1, "", "create_cluster", true});
  for (int i = 0; i < n; ++i) {
    NodeHandle node;
    node.index = i;
    node.host_id = hosts[static_cast<std::size_t>(i)].id;
    node.role = i == 0 ? NodeRole::master : NodeRole::worker;
    c.nodes.push_back(node);
    c.events.push_back({t, 1, node.host_id, "register_host", true});
  }

  // Stage 2: the VM layer.
  if (cap.has_vm_layer) {
    ProvisionRequest request;
    request.cluster = cname;
    request.uconf = uconf;
    request.base_image = options.base_image.empty() ? "img-default" : options.base_image;
    request.plan = c.storage_plan;
    const double t0 = t;
    auto runs = parallel_map(c.nodes.size(), [&](std::size_t i) {
      NodeRun run;
      run.end = t0;
      auto& node = c.nodes[i];
      for (auto step : {VmStep::create_vm, VmStep::create_img, VmStep::configure, VmStep::setup_shared_vol,
                        VmStep::setup_network, VmStep::register_vm}) {
        const auto r = backend.vm_step(step, node, request, run.end);
        run.end += r.duration;
        run.events.push_back({run.end, 2, node.host_id, bee::to_string(step), r.ok});
        if (!r.ok) {
          run.failure = bee::to_string(step) + ": " + r.cause;
          break;
        }
      }
      return run;
    });
    merge_events(c, runs);
    check_stage(c, backend, 2, runs);
    t = join(t, runs);

    const auto started = backend.start_vms(c.nodes, c.topology, parallelism, t);
    auto start_runs = start_results(c, started, t, 2, "start_vm");
    merge_events(c, start_runs);
    check_stage(c, backend, 2, start_runs);
    t = join(t, start_runs);
  } else {
    // No VM layer: containers run on the hosts, which own the overlay address directly.
    for (auto& node : c.nodes) {
      node.mpi_vnic_addr = overlay_address(node.index);
      node.vm_addresses = {node.mpi_vnic_addr};
    }
  }
  backend.advance_to(t);
  c.transition(Status::vm_layer_up);

  // Stage 3: the container layer.
  {
    const bool pull = std::holds_alternative<ImageRef>(app.container_source);
    const double t0 = t;
    auto runs = parallel_map(c.nodes.size(), [&](std::size_t i) {
      NodeRun run;
      run.end = t0;
      auto& node = c.nodes[i];
      for (auto step : {ContainerStep::create_docker, pull ? ContainerStep::img_pull : ContainerStep::img_build,
                        ContainerStep::register_docker}) {
        const auto r = backend.container_step(step, node, app, run.end);
        run.end += r.duration;
        run.events.push_back({run.end, 3, node.host_id, bee::to_string(step), r.ok});
        if (!r.ok) {
          run.failure = bee::to_string(step) + ": " + r.cause;
          break;
        }
      }
      return run;
    });
    merge_events(c, runs);
    check_stage(c, backend, 3, runs);
    t = join(t, runs);
    for (auto& node : c.nodes) node.volume_mounts[c.storage_plan.mount_path] = mount_source(c.storage_plan, c, node);

    const auto started = backend.start_containers(c.nodes, parallelism, t);
    auto start_runs = start_results(c, started, t, 3, "start_docker");
    merge_events(c, start_runs);
    check_stage(c, backend, 3, start_runs);
    t = join(t, start_runs);
  }
  backend.advance_to(t);
  c.transition(Status::docker_layer_up);

  // Stage 4: start the application inside the master's container.
  const auto& master = c.nodes.front();
  if (options.volume) {
    const auto r = backend.put_volume(master, *options.volume);
    if (!r.ok) fail(c, backend, 4, master.host_id, "put_volume: " + r.cause);
  }
  AppLaunch launch;
  if (options.launch) {
    launch = *options.launch;
  } else {
    launch.total_ticks = workload::total_ticks(app.work_total);
    launch.cores = app.process_count;
  }
  if (!app.entry_command.empty()) backend.exec(master, app.entry_command, t);
  const auto r = backend.start_app(master, launch, t);
  t += r.duration;
  c.events.push_back({t, 4, master.host_id, "start_app", r.ok});
  if (!r.ok) fail(c, backend, 4, master.host_id, "start_app: " + r.cause);
  backend.advance_to(t);
  c.transition(Status::app_running);
  return c;
}

void pause(ClusterState& cluster, Backend& backend) {
  cluster.transition(Status::paused);
  backend.pause(cluster.nodes);
}

void resume(ClusterState& cluster, Backend& backend) {
  if (cluster.status != Status::paused)
    throw Error("cluster '" + cluster.name + "' is " + to_string(cluster.status) + ", cannot resume");
  cluster.transition(Status::app_running);
  backend.resume(cluster.nodes);
}

void stop(ClusterState& cluster, Backend& backend) {
  cluster.transition(Status::stopped);
  backend.stop(cluster.nodes);
  for (auto& node : cluster.nodes) {
    node.ssh_forward_port = 0;
    node.shared_volume.clear();
  }
}

}  // namespace bee::cluster
