#include "bee/local_backend.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "bee/digest.hpp"
#include "bee/workload.hpp"

namespace bee {

namespace {

std::filesystem::path make_temp_dir() {
  auto pattern = (std::filesystem::temp_directory_path() / "bee-local-XXXXXX").string();
  if (!::mkdtemp(pattern.data())) throw Error("cannot create a temporary directory");
  return pattern;
}

}  // namespace

LocalBackend::LocalBackend(BackendConfig config, ComputeSystem system, std::filesystem::path workdir)
    : Backend(std::move(config), std::move(system)), workdir_(std::move(workdir)), epoch_(Clock::now()) {
  if (workdir_.empty()) {
    workdir_ = make_temp_dir();
    owns_workdir_ = true;
  }
  std::filesystem::create_directories(workdir_);
}

LocalBackend::~LocalBackend() {
  network_.reset();
  if (owns_workdir_) {
    std::error_code ec;
    std::filesystem::remove_all(workdir_, ec);
  }
}

BackendCapability LocalBackend::capability() const {
  BackendCapability c;
  c.has_vm_layer = true;
  c.native_shared_fs = false;
  c.topology_choices = {NetworkSolution::multicast, NetworkSolution::p2p_star, NetworkSolution::p2p_tree};
  c.perf.cpu_overhead_fraction = config_.cpu_overhead_fraction.value_or(0.09);
  c.perf.net_bandwidth = system_.net_bandwidth_native;
  c.perf.disk = system_.disk_bandwidth_native;
  c.perf.hop_latency_s = config_.hop_latency_ms / 1000.0;
  return c;
}

double LocalBackend::elapsed_since(Clock::time_point start) const {
  return std::chrono::duration<double>(Clock::now() - start).count() / config_.time_scale;
}

double LocalBackend::now() const {
  std::lock_guard lock(clock_mutex_);
  return frozen_at_ ? *frozen_at_ : elapsed_since(epoch_);
}

void LocalBackend::advance_to(double t) {
  Clock::time_point target;
  {
    std::lock_guard lock(clock_mutex_);
    if (frozen_at_) {
      frozen_at_ = std::max(*frozen_at_, t);
      return;
    }
    target = epoch_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(t * config_.time_scale));
  }
  std::this_thread::sleep_until(target);
}

void LocalBackend::freeze() {
  std::lock_guard lock(clock_mutex_);
  if (!frozen_at_) frozen_at_ = elapsed_since(epoch_);
}

void LocalBackend::thaw() {
  std::lock_guard lock(clock_mutex_);
  if (!frozen_at_) return;
  epoch_ = Clock::now() - std::chrono::duration_cast<Clock::duration>(
                              std::chrono::duration<double>(*frozen_at_ * config_.time_scale));
  frozen_at_.reset();
}

std::filesystem::path LocalBackend::node_dir(const NodeHandle& node) const {
  return workdir_ / cluster_ / ("vm" + std::to_string(node.index));
}

OpResult LocalBackend::control_ok(const NodeHandle& node, const json& request) {
  OpResult r;
  const auto start = Clock::now();
  try {
    std::lock_guard lock(mutex_);
    if (!network_) throw Error("nodes are not running");
    const auto reply = network_->control(node.index, request);
    if (!reply.value("ok", false)) {
      r.ok = false;
      r.cause = reply.value("error", std::string("agent refused ") + request.at("cmd").get<std::string>());
    }
  } catch (const Error& e) {
    r.ok = false;
    r.cause = e.what();
  }
  r.duration = elapsed_since(start);
  return r;
}

OpResult LocalBackend::vm_step(VmStep step, NodeHandle& node, const ProvisionRequest& request, double) {
  const auto name = to_string(step);
  const auto& host = node.host_id;
  const auto start = Clock::now();
  OpResult r;
  if (auto fault = deploy_fault(host, name)) {
    r.ok = false;
    r.cause = *fault;
    log(now(), name, host, "failed: " + r.cause);
    return r;
  }
  {
    std::lock_guard lock(mutex_);
    cluster_ = request.cluster;
  }
  const auto dir = node_dir(node);
  std::string detail;
  switch (step) {
    case VmStep::create_vm:
      std::filesystem::create_directories(dir);
      node.vm_id = request.cluster + "-vm" + std::to_string(node.index);
      detail = node.vm_id;
      break;
    case VmStep::create_img:
      std::ofstream(dir / "image.txt") << request.base_image << '\n';
      detail = request.base_image;
      break;
    case VmStep::configure:
      write_json_file(dir / "uconf.json", json(request.uconf));
      detail = std::to_string(request.uconf.vcpus) + " vcpus, " + std::to_string(request.uconf.ram_mb) + " MB";
      break;
    case VmStep::setup_shared_vol:
      if (request.plan.solution == StorageSolution::virtio_passthrough && !system_.host_file_sharing) {
        r.ok = false;
        r.cause = "host file sharing unavailable on " + system_.id;
        break;
      }
      std::filesystem::create_directories(workdir_ / cluster_ / "shared");
      node.shared_volume = request.cluster + ":" + request.plan.mount_path;
      registry_.mount(host, node.shared_volume);
      detail = to_string(request.plan.solution);
      break;
    case VmStep::setup_network:
      node.ssh_forward_port = registry_.allocate_port(host, request.uconf.ssh_base_port);
      node.mpi_vnic_addr = overlay_address(node.index);
      node.vm_addresses = {kSshVnicAddress, node.mpi_vnic_addr};
      detail = "ssh " + std::to_string(node.ssh_forward_port) + ", mpi " + node.mpi_vnic_addr;
      break;
    case VmStep::register_vm:
      registry_.register_vm(host, node.vm_id);
      detail = node.vm_id;
      break;
  }
  r.duration = elapsed_since(start);
  log(now(), name, host, r.ok ? detail : "failed: " + r.cause);
  return r;
}

std::vector<OpResult> LocalBackend::start_vms(std::span<NodeHandle> nodes, const net::Topology& topology, int,
                                              double) {
  if (static_cast<int>(nodes.size()) != topology.n) throw Error("topology size does not match the node count");
  std::vector<OpResult> out(nodes.size());
  const auto start = Clock::now();
  bool any_fault = false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (auto fault = deploy_fault(nodes[i].host_id, "start_vm")) {
      out[i].ok = false;
      out[i].cause = *fault;
      any_fault = true;
    }
  }
  if (!any_fault) {
    try {
      std::lock_guard lock(mutex_);
      net::LocalNetworkOptions options;
      options.workdir = workdir_ / cluster_ / "net";
      network_ = std::make_unique<net::LocalNetwork>(topology, options);
      network_->start();
    } catch (const Error& e) {
      network_.reset();
      for (auto& r : out) {
        r.ok = false;
        r.cause = e.what();
      }
    }
  }
  const double d = elapsed_since(start);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out[i].duration = d;
    log(now(), "start_vm", nodes[i].host_id, out[i].ok ? std::string() : "failed: " + out[i].cause);
  }
  return out;
}

OpResult LocalBackend::container_step(ContainerStep step, NodeHandle& node, const AppSpec& app, double) {
  const auto name = to_string(step);
  const auto& host = node.host_id;
  OpResult r;
  if (auto fault = deploy_fault(host, name)) {
    r.ok = false;
    r.cause = *fault;
    log(now(), name, host, "failed: " + r.cause);
    return r;
  }
  std::vector<std::string> argv;
  switch (step) {
    case ContainerStep::create_docker:
      node.docker_id = node.vm_id + "-dkr1";
      argv = {"docker", "create", "--name", node.docker_id, "--network", "host"};
      break;
    case ContainerStep::img_pull: {
      const auto* ref = std::get_if<ImageRef>(&app.container_source);
      if (!ref) throw Error("img_pull needs an image_ref source");
      node.container_image = ref->ref;
      argv = {"docker", "pull", ref->ref};
      break;
    }
    case ContainerStep::img_build: {
      const auto* file = std::get_if<Buildfile>(&app.container_source);
      if (!file) throw Error("img_build needs a buildfile source");
      node.container_image = "build:" + file->path;
      argv = {"docker", "build", "-f", file->path};
      break;
    }
    case ContainerStep::register_docker:
      node.container_addresses = node.vm_addresses;
      argv = {"docker", "tag", node.docker_id};
      break;
  }
  r = control_ok(node, {{"cmd", "exec"}, {"argv", argv}});
  log(now(), name, host, r.ok ? node.docker_id : "failed: " + r.cause);
  return r;
}

std::vector<OpResult> LocalBackend::start_containers(std::span<NodeHandle> nodes, int, double) {
  std::vector<OpResult> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& node = nodes[i];
    if (auto fault = deploy_fault(node.host_id, "start_docker")) {
      out[i].ok = false;
      out[i].cause = *fault;
    } else {
      out[i] = control_ok(node, {{"cmd", "exec"}, {"argv", {"docker", "start", node.docker_id}}});
    }
    if (out[i].ok) {
      std::lock_guard lock(mutex_);
      running_[node.index] = node.host_id;
    }
    log(now(), "start_docker", node.host_id, out[i].ok ? std::string() : "failed: " + out[i].cause);
  }
  return out;
}

OpResult LocalBackend::exec(const NodeHandle& node, const std::vector<std::string>& argv, double) {
  auto r = control_ok(node, {{"cmd", "exec"}, {"argv", argv}});
  std::string line;
  for (const auto& a : argv) line += (line.empty() ? "" : " ") + a;
  log(now(), "exec", node.host_id, line);
  return r;
}

OpResult LocalBackend::start_app(const NodeHandle& master, const AppLaunch& launch, double) {
  thaw();
  if (auto fault = deploy_fault(master.host_id, "start_app")) {
    log(now(), "start_app", master.host_id, "failed: " + *fault);
    return {false, 0.0, *fault};
  }
  const double rate = launch.cores * system_.cpu_rate_native * (1.0 - capability().perf.cpu_overhead_fraction);
  auto r = control_ok(master, {{"cmd", "start_app"},
                               {"start_ticks", launch.start_ticks},
                               {"total_ticks", launch.total_ticks},
                               {"ticks_per_second", rate * workload::kTicksPerUnit / config_.time_scale},
                               {"delay_s", launch.io_seconds * config_.time_scale}});
  log(now(), "start_app", master.host_id,
      "ticks " + std::to_string(launch.start_ticks) + "/" + std::to_string(launch.total_ticks));
  return r;
}

ProgressReport LocalBackend::progress(const NodeHandle& master) {
  ProgressReport report;
  const double t = now();
  std::lock_guard lock(mutex_);
  if (!network_) {
    report.node_failed = true;
    report.failed_host = master.host_id;
    return report;
  }
  for (const auto& [index, host] : running_) {
    auto f = node_failure(host);
    if (f && f->at_s <= t && network_->alive(index)) network_->kill(index);
  }
  for (const auto& [index, host] : running_) {
    if (!network_->alive(index)) {
      report.node_failed = true;
      report.failed_host = host;
      return report;
    }
  }
  try {
    const auto reply = network_->control(master.index, {{"cmd", "progress"}});
    report.ticks = reply.at("ticks").get<std::int64_t>();
  } catch (const Error&) {
    report.node_failed = true;
    report.failed_host = master.host_id;
  }
  return report;
}

void LocalBackend::pause(std::span<const NodeHandle> nodes) {
  for (const auto& n : nodes) {
    control_ok(n, {{"cmd", "pause"}});
    log(now(), "pause", n.host_id);
  }
  freeze();
}

void LocalBackend::resume(std::span<const NodeHandle> nodes) {
  for (const auto& n : nodes) {
    control_ok(n, {{"cmd", "resume"}});
    log(now(), "resume", n.host_id);
  }
  thaw();
}

void LocalBackend::stop(std::span<const NodeHandle> nodes) {
  freeze();
  {
    std::lock_guard lock(mutex_);
    network_.reset();
    running_.clear();
  }
  for (const auto& n : nodes) {
    if (n.ssh_forward_port) registry_.release_port(n.host_id, n.ssh_forward_port);
    if (!n.vm_id.empty()) registry_.unregister_vm(n.host_id, n.vm_id);
    if (!n.shared_volume.empty()) registry_.unmount(n.host_id, n.shared_volume);
    log(now(), "stop", n.host_id);
  }
}

OpResult LocalBackend::put_volume(const NodeHandle& node, const Bytes& content) {
  const auto path = node_dir(node) / "incoming.bin";
  std::filesystem::create_directories(path.parent_path());
  write_file_bytes(path, content);
  auto r = control_ok(node, {{"cmd", "put_volume"}, {"path", path.string()}});
  log(now(), "put_volume", node.host_id, std::to_string(content.size()) + " bytes");
  return r;
}

std::optional<Bytes> LocalBackend::fetch_volume(const NodeHandle& node) {
  if (checkpoint_write_fails()) {
    log(now(), "fetch_volume", node.host_id, "failed: injected checkpoint write fault");
    return std::nullopt;
  }
  const auto path = node_dir(node) / "snapshot.bin";
  std::filesystem::create_directories(path.parent_path());
  const auto r = control_ok(node, {{"cmd", "snapshot"}, {"path", path.string()}});
  if (!r.ok) {
    log(now(), "fetch_volume", node.host_id, "failed: " + r.cause);
    return std::nullopt;
  }
  auto content = read_file_bytes(path);
  log(now(), "fetch_volume", node.host_id, std::to_string(content.size()) + " bytes");
  return content;
}

}  // namespace bee
