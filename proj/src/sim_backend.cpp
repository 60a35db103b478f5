#include "bee/sim_backend.hpp"

#include <algorithm>

#include "bee/rng.hpp"
#include "bee/workload.hpp"

namespace bee {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double default_overhead(SimFlavor flavor) { return flavor == SimFlavor::cloud_baremetal ? 0.0 : 0.09; }

}  // namespace

SimBackend::SimBackend(BackendConfig config, ComputeSystem system, SimFlavor flavor)
    : Backend(std::move(config), std::move(system)), flavor_(flavor) {}

BackendCapability SimBackend::capability() const {
  BackendCapability c;
  c.has_vm_layer = flavor_ != SimFlavor::cloud_baremetal;
  c.native_shared_fs = flavor_ != SimFlavor::hpc;
  if (flavor_ == SimFlavor::hpc)
    c.topology_choices = {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree};
  c.perf.cpu_overhead_fraction = config_.cpu_overhead_fraction.value_or(default_overhead(flavor_));
  c.perf.net_bandwidth = system_.net_bandwidth_native;
  c.perf.disk = system_.disk_bandwidth_native;
  c.perf.hop_latency_s = config_.hop_latency_ms / 1000.0;
  c.perf.flat_network = flavor_ != SimFlavor::hpc;
  return c;
}

double SimBackend::now() const {
  std::lock_guard lock(mutex_);
  return now_;
}

void SimBackend::advance_to(double t) {
  std::lock_guard lock(mutex_);
  now_ = std::max(now_, t);
}

double SimBackend::draw(const std::string& host, const std::string& op) const {
  Rng rng(mix_seed(config_.seed, fnv1a(host + "/" + op)));
  return rng.unit();
}

double SimBackend::jittered(double base, const std::string& host, const std::string& op) const {
  return base * (1.0 + 0.2 * draw(host, op));
}

OpResult SimBackend::vm_step(VmStep step, NodeHandle& node, const ProvisionRequest& request, double at) {
  const auto name = to_string(step);
  const auto& host = node.host_id;
  OpResult r;
  if (!capability().has_vm_layer) {
    r.ok = false;
    r.cause = "backend has no VM layer";
    return r;
  }
  if (auto fault = deploy_fault(host, name)) {
    r.ok = false;
    r.cause = *fault;
    log(at, name, host, "failed: " + r.cause);
    return r;
  }
  std::string detail;
  switch (step) {
    case VmStep::create_vm:
      if (!system_.kvm_available) {
        r.ok = false;
        r.cause = "kvm unavailable on " + system_.id;
        break;
      }
      node.vm_id = request.cluster + "-vm" + std::to_string(node.index);
      r.duration = jittered(config_.vm_create_s, host, name);
      detail = node.vm_id;
      break;
    case VmStep::create_img:
      r.duration = jittered(config_.image_create_s, host, name);
      detail = request.base_image;
      break;
    case VmStep::configure:
      r.duration = jittered(config_.configure_s, host, name);
      detail = std::to_string(request.uconf.vcpus) + " vcpus, " + std::to_string(request.uconf.ram_mb) + " MB";
      break;
    case VmStep::setup_shared_vol:
      if (request.plan.solution == StorageSolution::virtio_passthrough && !system_.host_file_sharing &&
          !request.plan.native_shared_fs) {
        r.ok = false;
        r.cause = "host file sharing unavailable on " + system_.id;
        break;
      }
      node.shared_volume = request.cluster + ":" + request.plan.mount_path;
      registry_.mount(host, node.shared_volume);
      r.duration = jittered(config_.shared_vol_s, host, name);
      detail = to_string(request.plan.solution);
      break;
    case VmStep::setup_network:
      node.ssh_forward_port = registry_.allocate_port(host, request.uconf.ssh_base_port);
      node.mpi_vnic_addr = overlay_address(node.index);
      node.vm_addresses = {kSshVnicAddress, node.mpi_vnic_addr};
      r.duration = jittered(config_.network_s, host, name);
      detail = "ssh " + std::to_string(node.ssh_forward_port) + ", mpi " + node.mpi_vnic_addr;
      break;
    case VmStep::register_vm:
      registry_.register_vm(host, node.vm_id);
      r.duration = config_.register_s;
      detail = node.vm_id;
      break;
  }
  log(at + r.duration, name, host, r.ok ? detail : "failed: " + r.cause);
  return r;
}

std::vector<OpResult> SimBackend::start_batched(std::span<NodeHandle> nodes, int parallelism, double at,
                                                const std::string& action, double base) {
  const int n = static_cast<int>(nodes.size());
  const int p = std::clamp(parallelism, 1, std::max(1, n));
  std::vector<OpResult> out(nodes.size());
  double batch_start = at;
  for (int first = 0; first < n; first += p) {
    double batch_end = batch_start;
    for (int i = first; i < std::min(n, first + p); ++i) {
      auto& node = nodes[static_cast<std::size_t>(i)];
      auto& r = out[static_cast<std::size_t>(i)];
      double d = base;
      if (action == "start_vm") d += config_.vm_boot_jitter_s * draw(node.host_id, action);
      if (auto fault = deploy_fault(node.host_id, action)) {
        r.ok = false;
        r.cause = *fault;
        d = 0.0;
      }
      r.duration = batch_start + d - at;
      batch_end = std::max(batch_end, batch_start + d);
      log(batch_start + d, action, node.host_id, r.ok ? std::string() : "failed: " + r.cause);
    }
    batch_start = batch_end;
  }
  return out;
}

std::vector<OpResult> SimBackend::start_vms(std::span<NodeHandle> nodes, const net::Topology& topology,
                                            int parallelism, double at) {
  if (static_cast<int>(nodes.size()) != topology.n) throw Error("topology size does not match the node count");
  return start_batched(nodes, parallelism, at, "start_vm", config_.vm_boot_s);
}

OpResult SimBackend::container_step(ContainerStep step, NodeHandle& node, const AppSpec& app, double at) {
  const auto name = to_string(step);
  const auto& host = node.host_id;
  OpResult r;
  if (auto fault = deploy_fault(host, name)) {
    r.ok = false;
    r.cause = *fault;
    log(at, name, host, "failed: " + r.cause);
    return r;
  }
  std::string detail;
  switch (step) {
    case ContainerStep::create_docker:
      node.docker_id = (node.vm_id.empty() ? host : node.vm_id) + "-dkr1";
      r.duration = jittered(config_.container_create_s, host, name);
      detail = node.docker_id;
      break;
    case ContainerStep::img_pull: {
      const auto* ref = std::get_if<ImageRef>(&app.container_source);
      if (!ref) throw Error("img_pull needs an image_ref source");
      node.container_image = ref->ref;
      r.duration = config_.image_size_mb / system_.net_bandwidth_native;
      detail = ref->ref;
      break;
    }
    case ContainerStep::img_build: {
      const auto* file = std::get_if<Buildfile>(&app.container_source);
      if (!file) throw Error("img_build needs a buildfile source");
      node.container_image = "build:" + file->path;
      r.duration = config_.build_step_s * config_.build_steps;
      detail = file->path;
      break;
    }
    case ContainerStep::register_docker:
      node.container_addresses = node.vm_addresses;
      r.duration = config_.register_s;
      detail = node.docker_id;
      break;
  }
  log(at + r.duration, name, host, detail);
  return r;
}

std::vector<OpResult> SimBackend::start_containers(std::span<NodeHandle> nodes, int parallelism, double at) {
  auto out = start_batched(nodes, parallelism, at, "start_docker", config_.container_start_s);
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (out[i].ok) running_hosts_.insert(nodes[i].host_id);
  }
  return out;
}

OpResult SimBackend::exec(const NodeHandle& node, const std::vector<std::string>& argv, double at) {
  std::string line;
  for (const auto& a : argv) line += (line.empty() ? "" : " ") + a;
  log(at, "exec", node.host_id, line);
  return {};
}

OpResult SimBackend::start_app(const NodeHandle& master, const AppLaunch& launch, double at) {
  OpResult r;
  if (auto fault = deploy_fault(master.host_id, "start_app")) {
    r.ok = false;
    r.cause = *fault;
    log(at, "start_app", master.host_id, "failed: " + r.cause);
    return r;
  }
  r.duration = config_.app_start_s;
  {
    std::lock_guard lock(mutex_);
    app_ = App{};
    app_.started = true;
    app_.begin = at + r.duration + launch.io_seconds;
    app_.start_ticks = launch.start_ticks;
    app_.total_ticks = launch.total_ticks;
    app_.rate = launch.cores * system_.cpu_rate_native * (1.0 - capability().perf.cpu_overhead_fraction);
  }
  log(at, "start_app", master.host_id,
      "ticks " + std::to_string(launch.start_ticks) + "/" + std::to_string(launch.total_ticks));
  return r;
}

std::int64_t SimBackend::ticks_at(double t) const {
  if (!app_.started) return 0;
  const double until = app_.paused ? app_.paused_at : t;
  const double elapsed = until - app_.begin - app_.paused_total;
  if (elapsed <= 0) return app_.start_ticks;
  return std::min(app_.total_ticks, app_.start_ticks + workload::ticks_for(elapsed, app_.rate));
}

ProgressReport SimBackend::progress(const NodeHandle&) {
  std::lock_guard lock(mutex_);
  ProgressReport r;
  r.ticks = ticks_at(now_);
  for (const auto& host : running_hosts_) {
    auto f = node_failure(host);
    if (f && f->at_s <= now_) {
      r.node_failed = true;
      r.failed_host = host;
      break;
    }
  }
  return r;
}

void SimBackend::pause(std::span<const NodeHandle> nodes) {
  double t;
  {
    std::lock_guard lock(mutex_);
    t = now_;
    if (app_.started && !app_.paused) {
      app_.paused = true;
      app_.paused_at = now_;
    }
  }
  for (const auto& n : nodes) log(t, "pause", n.host_id);
}

void SimBackend::resume(std::span<const NodeHandle> nodes) {
  double t;
  {
    std::lock_guard lock(mutex_);
    t = now_;
    if (app_.paused) {
      app_.paused_total += now_ - app_.paused_at;
      app_.paused = false;
    }
  }
  for (const auto& n : nodes) log(t, "resume", n.host_id);
}

void SimBackend::stop(std::span<const NodeHandle> nodes) {
  double t;
  {
    std::lock_guard lock(mutex_);
    t = now_;
    app_ = App{};
    for (const auto& n : nodes) {
      running_hosts_.erase(n.host_id);
      volumes_.erase(n.host_id);
    }
  }
  for (const auto& n : nodes) {
    if (n.ssh_forward_port) registry_.release_port(n.host_id, n.ssh_forward_port);
    if (!n.vm_id.empty()) registry_.unregister_vm(n.host_id, n.vm_id);
    if (!n.shared_volume.empty()) registry_.unmount(n.host_id, n.shared_volume);
    log(t, "stop", n.host_id);
  }
}

OpResult SimBackend::put_volume(const NodeHandle& node, const Bytes& content) {
  double t;
  {
    std::lock_guard lock(mutex_);
    volumes_[node.host_id] = content;
    t = now_;
  }
  log(t, "put_volume", node.host_id, std::to_string(content.size()) + " bytes");
  return {};
}

std::optional<Bytes> SimBackend::fetch_volume(const NodeHandle& node) {
  double t;
  Bytes out;
  {
    std::lock_guard lock(mutex_);
    t = now_;
    if (!checkpoint_write_fails()) {
      auto& volume = volumes_[node.host_id];
      const auto ticks = std::max(ticks_at(now_), workload::progress_ticks(volume));
      volume = workload::advance(volume, ticks);
      out = volume;
    }
  }
  if (checkpoint_write_fails()) {
    log(t, "fetch_volume", node.host_id, "failed: injected checkpoint write fault");
    return std::nullopt;
  }
  log(t, "fetch_volume", node.host_id, std::to_string(out.size()) + " bytes");
  return out;
}

}  // namespace bee
