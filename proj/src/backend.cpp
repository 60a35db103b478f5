#include "bee/backend.hpp"

#include <algorithm>
#include <filesystem>

#include "bee/local_backend.hpp"
#include "bee/sim_backend.hpp"

namespace bee {

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::sim: return "sim";
    case BackendKind::sim_hpc: return "sim-hpc";
    case BackendKind::local: return "local";
    case BackendKind::sim_cloud_aws: return "sim-cloud-aws";
    case BackendKind::sim_cloud_baremetal: return "sim-cloud-baremetal";
  }
  return "?";
}

BackendKind parse_backend_kind(const std::string& text) {
  for (auto k : {BackendKind::sim, BackendKind::sim_hpc, BackendKind::local, BackendKind::sim_cloud_aws,
                 BackendKind::sim_cloud_baremetal}) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown backend '" + text + "'");
}

namespace {

std::string fault_kind_name(Fault::Kind k) {
  switch (k) {
    case Fault::Kind::deploy_step: return "deploy_step";
    case Fault::Kind::node_failure: return "node_failure";
    case Fault::Kind::transfer_corrupt: return "transfer_corrupt";
    case Fault::Kind::checkpoint_write: return "checkpoint_write";
  }
  return "?";
}

Fault::Kind parse_fault_kind(const std::string& s) {
  for (auto k : {Fault::Kind::deploy_step, Fault::Kind::node_failure, Fault::Kind::transfer_corrupt,
                 Fault::Kind::checkpoint_write}) {
    if (fault_kind_name(k) == s) return k;
  }
  throw Error("unknown fault kind '" + s + "'");
}

bool matches(const std::string& pattern, const std::string& value) { return pattern.empty() || pattern == value; }

}  // namespace

void to_json(json& j, const Fault& f) {
  j = json{{"kind", fault_kind_name(f.kind)}, {"system", f.system}, {"host", f.host},
           {"action", f.action},              {"at_s", f.at_s},     {"count", f.count}};
}

void from_json(const json& j, Fault& f) {
  f.kind = parse_fault_kind(j.at("kind").get<std::string>());
  f.system = j.value("system", std::string());
  f.host = j.value("host", std::string());
  f.action = j.value("action", std::string());
  f.at_s = j.value("at_s", 0.0);
  f.count = j.value("count", 1);
}

void to_json(json& j, const BackendConfig& c) {
  j = json{{"backend", to_string(c.kind)},
           {"seed", c.seed},
           {"cpu_overhead_fraction", c.cpu_overhead_fraction ? json(*c.cpu_overhead_fraction) : json(nullptr)},
           {"hop_latency_ms", c.hop_latency_ms},
           {"poll_interval_s", c.poll_interval_s},
           {"vm_create_s", c.vm_create_s},
           {"image_create_s", c.image_create_s},
           {"configure_s", c.configure_s},
           {"shared_vol_s", c.shared_vol_s},
           {"network_s", c.network_s},
           {"register_s", c.register_s},
           {"vm_boot_s", c.vm_boot_s},
           {"vm_boot_jitter_s", c.vm_boot_jitter_s},
           {"container_create_s", c.container_create_s},
           {"image_size_mb", c.image_size_mb},
           {"build_step_s", c.build_step_s},
           {"build_steps", c.build_steps},
           {"container_start_s", c.container_start_s},
           {"app_start_s", c.app_start_s},
           {"message_bytes", c.message_bytes},
           {"sends_per_process", c.sends_per_process},
           {"time_scale", c.time_scale},
           {"faults", c.faults}};
}

void from_json(const json& j, BackendConfig& c) {
  BackendConfig d;
  c.kind = parse_backend_kind(j.value("backend", to_string(d.kind)));
  c.seed = j.value("seed", d.seed);
  if (j.contains("cpu_overhead_fraction") && !j.at("cpu_overhead_fraction").is_null())
    c.cpu_overhead_fraction = j.at("cpu_overhead_fraction").get<double>();
  else
    c.cpu_overhead_fraction.reset();
  c.hop_latency_ms = j.value("hop_latency_ms", d.hop_latency_ms);
  c.poll_interval_s = j.value("poll_interval_s", d.poll_interval_s);
  c.vm_create_s = j.value("vm_create_s", d.vm_create_s);
  c.image_create_s = j.value("image_create_s", d.image_create_s);
  c.configure_s = j.value("configure_s", d.configure_s);
  c.shared_vol_s = j.value("shared_vol_s", d.shared_vol_s);
  c.network_s = j.value("network_s", d.network_s);
  c.register_s = j.value("register_s", d.register_s);
  c.vm_boot_s = j.value("vm_boot_s", d.vm_boot_s);
  c.vm_boot_jitter_s = j.value("vm_boot_jitter_s", d.vm_boot_jitter_s);
  c.container_create_s = j.value("container_create_s", d.container_create_s);
  c.image_size_mb = j.value("image_size_mb", d.image_size_mb);
  c.build_step_s = j.value("build_step_s", d.build_step_s);
  c.build_steps = j.value("build_steps", d.build_steps);
  c.container_start_s = j.value("container_start_s", d.container_start_s);
  c.app_start_s = j.value("app_start_s", d.app_start_s);
  c.message_bytes = j.value("message_bytes", d.message_bytes);
  c.sends_per_process = j.value("sends_per_process", d.sends_per_process);
  c.time_scale = j.value("time_scale", d.time_scale);
  c.faults = j.value("faults", std::vector<Fault>{});
  if (c.cpu_overhead_fraction && !(*c.cpu_overhead_fraction >= 0.0 && *c.cpu_overhead_fraction < 1.0))
    throw Error("cpu_overhead_fraction must be in [0, 1)");
  if (!(c.poll_interval_s > 0)) throw Error("poll_interval_s must be positive");
  if (!(c.time_scale > 0)) throw Error("time_scale must be positive");
}

void to_json(json& j, const BackendCapability& c) {
  json choices = json::array();
  for (auto s : c.topology_choices) choices.push_back(to_string(s));
  j = json{{"has_vm_layer", c.has_vm_layer},
           {"native_shared_fs", c.native_shared_fs},
           {"topology_choices", choices},
           {"perf",
            {{"cpu_overhead_fraction", c.perf.cpu_overhead_fraction},
             {"net_bandwidth", c.perf.net_bandwidth},
             {"disk_bandwidth", c.perf.disk},
             {"hop_latency_s", c.perf.hop_latency_s},
             {"flat_network", c.perf.flat_network}}}};
}

double sim_compute(double work, int cores, double cpu_rate_native, double cpu_overhead_fraction) {
  if (work < 0) throw Error("work must be non-negative");
  if (cores < 1) throw Error("cores must be at least 1");
  if (!(cpu_rate_native > 0)) throw Error("cpu rate must be positive");
  if (!(cpu_overhead_fraction >= 0.0 && cpu_overhead_fraction < 1.0))
    throw Error("cpu_overhead_fraction must be in [0, 1)");
  return work / (cores * cpu_rate_native * (1.0 - cpu_overhead_fraction));
}

void to_json(json& j, const SimEvent& e) {
  j = json{{"t", e.t}, {"kind", e.kind}, {"node", e.node}, {"detail", e.detail}};
}

void to_json(json& j, const NodeHandle& n) {
  j = json{{"index", n.index},
           {"host_id", n.host_id},
           {"vm_id", n.vm_id},
           {"docker_id", n.docker_id},
           {"role", n.role == NodeRole::master ? "master" : "worker"},
           {"ssh_forward_port", n.ssh_forward_port},
           {"mpi_vnic_addr", n.mpi_vnic_addr},
           {"vm_addresses", n.vm_addresses},
           {"container_image", n.container_image},
           {"container_addresses", n.container_addresses},
           {"volume_mounts", n.volume_mounts},
           {"shared_volume", n.shared_volume}};
}

std::string overlay_address(int index) {
  return "10.10." + std::to_string(index / 250) + "." + std::to_string(index % 250 + 1);
}

std::string to_string(VmStep step) {
  switch (step) {
    case VmStep::create_vm: return "create_vm";
    case VmStep::create_img: return "create_img";
    case VmStep::configure: return "configure";
    case VmStep::setup_shared_vol: return "setup_shared_vol";
    case VmStep::setup_network: return "setup_network";
    case VmStep::register_vm: return "register_vm";
  }
  return "?";
}

std::string to_string(ContainerStep step) {
  switch (step) {
    case ContainerStep::create_docker: return "create_docker";
    case ContainerStep::img_pull: return "img_pull";
    case ContainerStep::img_build: return "img_build";
    case ContainerStep::register_docker: return "register_docker";
  }
  return "?";
}

int HostRegistry::allocate_port(const std::string& host, int base) {
  if (base < 1 || base > 65535) throw Error("invalid base port " + std::to_string(base));
  std::lock_guard lock(mutex_);
  auto& used = ports_[host];
  for (int p = base; p <= 65535; ++p) {
    if (!used.contains(p)) {
      used.insert(p);
      return p;
    }
  }
  throw Error("port space exhausted on host " + host);
}

void HostRegistry::release_port(const std::string& host, int port) {
  std::lock_guard lock(mutex_);
  if (auto it = ports_.find(host); it != ports_.end()) {
    it->second.erase(port);
    if (it->second.empty()) ports_.erase(it);
  }
}

void HostRegistry::register_vm(const std::string& host, const std::string& vm) {
  std::lock_guard lock(mutex_);
  vms_[host].insert(vm);
}

void HostRegistry::unregister_vm(const std::string& host, const std::string& vm) {
  std::lock_guard lock(mutex_);
  if (auto it = vms_.find(host); it != vms_.end()) {
    it->second.erase(vm);
    if (it->second.empty()) vms_.erase(it);
  }
}

void HostRegistry::mount(const std::string& host, const std::string& volume) {
  std::lock_guard lock(mutex_);
  mounts_[host].insert(volume);
}

void HostRegistry::unmount(const std::string& host, const std::string& volume) {
  std::lock_guard lock(mutex_);
  if (auto it = mounts_.find(host); it != mounts_.end()) {
    it->second.erase(volume);
    if (it->second.empty()) mounts_.erase(it);
  }
}

bool HostRegistry::empty() const {
  std::lock_guard lock(mutex_);
  return ports_.empty() && vms_.empty() && mounts_.empty();
}

std::set<int> HostRegistry::ports(const std::string& host) const {
  std::lock_guard lock(mutex_);
  auto it = ports_.find(host);
  return it == ports_.end() ? std::set<int>{} : it->second;
}

std::set<std::string> HostRegistry::vms(const std::string& host) const {
  std::lock_guard lock(mutex_);
  auto it = vms_.find(host);
  return it == vms_.end() ? std::set<std::string>{} : it->second;
}

std::set<std::string> HostRegistry::mounts(const std::string& host) const {
  std::lock_guard lock(mutex_);
  auto it = mounts_.find(host);
  return it == mounts_.end() ? std::set<std::string>{} : it->second;
}

Backend::Backend(BackendConfig config, ComputeSystem system) : config_(std::move(config)), system_(std::move(system)) {}

double Backend::cpu_overhead_fraction() const { return capability().perf.cpu_overhead_fraction; }

OpResult Backend::provision(NodeHandle& node, const ProvisionRequest& request, double at) {
  OpResult total;
  for (auto step : {VmStep::create_vm, VmStep::create_img, VmStep::configure, VmStep::setup_shared_vol,
                    VmStep::setup_network, VmStep::register_vm}) {
    const auto r = vm_step(step, node, request, at + total.duration);
    total.duration += r.duration;
    if (!r.ok) {
      total.ok = false;
      total.cause = r.cause;
      return total;
    }
  }
  return total;
}

TransferResult Backend::transfer(const Bytes& payload, double from_bandwidth) {
  TransferResult r;
  double bw = system_.net_bandwidth_native;
  if (from_bandwidth > 0) bw = std::min(bw, from_bandwidth);
  r.duration = static_cast<double>(payload.size()) / kBytesPerMB / bw;
  r.delivered = payload;
  if (corrupt_next_transfer()) {
    if (r.delivered.empty())
      r.delivered.push_back(0);
    else
      r.delivered[r.delivered.size() / 2] ^= 0x5A;
  }
  const double t = now();
  log(t, "transfer", "", std::to_string(payload.size()) + " bytes");
  advance_to(t + r.duration);
  return r;
}

std::vector<SimEvent> Backend::events() const {
  std::lock_guard lock(log_mutex_);
  auto sorted = log_;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Logged& a, const Logged& b) {
    if (a.event.t != b.event.t) return a.event.t < b.event.t;
    if (a.event.node != b.event.node) return a.event.node < b.event.node;
    return a.seq < b.seq;
  });
  std::vector<SimEvent> out;
  out.reserve(sorted.size());
  for (auto& l : sorted) out.push_back(std::move(l.event));
  return out;
}

void Backend::log(double t, const std::string& kind, const std::string& node, const std::string& detail) {
  std::lock_guard lock(log_mutex_);
  log_.push_back({SimEvent{t, kind, node, detail}, node_seq_[node]++});
}

std::optional<std::string> Backend::deploy_fault(const std::string& host, const std::string& action) const {
  for (const auto& f : config_.faults) {
    if (f.kind == Fault::Kind::deploy_step && matches(f.system, system_.id) && matches(f.host, host) &&
        matches(f.action, action))
      return "injected fault in " + action;
  }
  return std::nullopt;
}

bool Backend::corrupt_next_transfer() {
  std::lock_guard lock(log_mutex_);
  int budget = 0;
  for (const auto& f : config_.faults) {
    if (f.kind == Fault::Kind::transfer_corrupt && matches(f.system, system_.id)) budget += f.count;
  }
  if (transfers_corrupted_ >= budget) return false;
  ++transfers_corrupted_;
  return true;
}

bool Backend::checkpoint_write_fails() const {
  return std::any_of(config_.faults.begin(), config_.faults.end(), [&](const Fault& f) {
    return f.kind == Fault::Kind::checkpoint_write && matches(f.system, system_.id);
  });
}

std::optional<Fault> Backend::node_failure(const std::string& host) const {
  for (const auto& f : config_.faults) {
    if (f.kind == Fault::Kind::node_failure && matches(f.system, system_.id) && matches(f.host, host)) return f;
  }
  return std::nullopt;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, const ComputeSystem& system,
                                      const std::filesystem::path& workdir) {
  switch (config.kind) {
    case BackendKind::sim:
      switch (system.kind) {
        case SystemKind::hpc: return std::make_unique<SimBackend>(config, system, SimFlavor::hpc);
        case SystemKind::cloud_aws_like: return std::make_unique<SimBackend>(config, system, SimFlavor::cloud_aws);
        case SystemKind::cloud_baremetal_like:
          return std::make_unique<SimBackend>(config, system, SimFlavor::cloud_baremetal);
      }
      break;
    case BackendKind::sim_hpc: return std::make_unique<SimBackend>(config, system, SimFlavor::hpc);
    case BackendKind::sim_cloud_aws: return std::make_unique<SimBackend>(config, system, SimFlavor::cloud_aws);
    case BackendKind::sim_cloud_baremetal:
      return std::make_unique<SimBackend>(config, system, SimFlavor::cloud_baremetal);
    case BackendKind::local: return std::make_unique<LocalBackend>(config, system, workdir);
  }
  throw Error("unsupported backend");
}

BackendFactory backend_factory(BackendConfig config, std::filesystem::path workdir) {
  return [config = std::move(config), workdir = std::move(workdir)](const ComputeSystem& system) {
    return make_backend(config, system, workdir.empty() ? workdir : workdir / system.id);
  };
}

}  // namespace bee
