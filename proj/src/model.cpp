#include "bee/model.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <utility>

namespace bee {

const ComputeSystem* ResourcePool::find(const std::string& id) const {
  auto it = std::find_if(systems.begin(), systems.end(), [&](const ComputeSystem& s) { return s.id == id; });
  return it == systems.end() ? nullptr : &*it;
}

double CommPattern::one_to_one_fraction() const {
  switch (kind) {
    case Kind::all_to_all:
      return 0.0;
    case Kind::one_to_one_heavy:
      return 0.95;
    case Kind::mixed:
      return ratio;
  }
  return 0.0;
}

namespace {

void add(ValidationReport& report, std::string field, std::string rule, std::string message) {
  report.push_back({std::move(field), std::move(rule), std::move(message)});
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::array<std::pair<const char*, Enum>, N>& table,
                const char* what) {
  for (const auto& [name, value] : table) {
    if (text == name) return value;
  }
  throw Error(std::string("unknown ") + what + " '" + text + "'");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum value, const std::array<std::pair<const char*, Enum>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<const char*, SystemKind>, 3> kSystemKinds{{
    {"hpc", SystemKind::hpc},
    {"cloud-aws-like", SystemKind::cloud_aws_like},
    {"cloud-baremetal-like", SystemKind::cloud_baremetal_like},
}};

constexpr std::array<std::pair<const char*, NetworkSolution>, 3> kNetworkSolutions{{
    {"multicast", NetworkSolution::multicast},
    {"p2p_star", NetworkSolution::p2p_star},
    {"p2p_tree", NetworkSolution::p2p_tree},
}};

constexpr std::array<std::pair<const char*, StorageSolution>, 2> kStorageSolutions{{
    {"data_image_nfs", StorageSolution::data_image_nfs},
    {"virtio_passthrough", StorageSolution::virtio_passthrough},
}};

constexpr std::array<std::pair<const char*, RunPhase>, 8> kRunPhases{{
    {"init", RunPhase::init},
    {"deploying", RunPhase::deploying},
    {"running", RunPhase::running},
    {"checkpointing", RunPhase::checkpointing},
    {"migrating", RunPhase::migrating},
    {"stalled", RunPhase::stalled},
    {"complete", RunPhase::complete},
    {"failed", RunPhase::failed},
}};

constexpr std::array<std::pair<const char*, CommPattern::Kind>, 3> kCommKinds{{
    {"all_to_all", CommPattern::Kind::all_to_all},
    {"one_to_one_heavy", CommPattern::Kind::one_to_one_heavy},
    {"mixed", CommPattern::Kind::mixed},
}};

}  // namespace

std::string to_string(SystemKind kind) { return enum_name(kind, kSystemKinds); }
std::string to_string(NetworkSolution solution) { return enum_name(solution, kNetworkSolutions); }
std::string to_string(StorageSolution solution) { return enum_name(solution, kStorageSolutions); }
std::string to_string(RunPhase phase) { return enum_name(phase, kRunPhases); }
std::string to_string(CommPattern::Kind kind) { return enum_name(kind, kCommKinds); }

SystemKind parse_system_kind(const std::string& text) { return parse_enum(text, kSystemKinds, "system kind"); }
NetworkSolution parse_network_solution(const std::string& text) {
  return parse_enum(text, kNetworkSolutions, "network solution");
}
StorageSolution parse_storage_solution(const std::string& text) {
  return parse_enum(text, kStorageSolutions, "storage solution");
}
RunPhase parse_run_phase(const std::string& text) { return parse_enum(text, kRunPhases, "run phase"); }
CommPattern::Kind parse_comm_pattern_kind(const std::string& text) {
  return parse_enum(text, kCommKinds, "comm pattern");
}

ValidationReport validate_system(const ComputeSystem& s, const std::string& p) {
  ValidationReport r;
  if (s.id.empty()) add(r, p + ".id", "non-empty", "system id must be non-empty");
  if (s.hosts.empty()) add(r, p + ".hosts", "non-empty", "system '" + s.id + "' has no hosts");
  std::set<std::string> host_ids;
  for (const auto& h : s.hosts) {
    if (h.id.empty()) add(r, p + ".hosts", "non-empty id", "host id must be non-empty");
    if (!host_ids.insert(h.id).second) add(r, p + ".hosts", "unique", "duplicate host id '" + h.id + "'");
  }
  if (!(s.time_slot > 0)) add(r, p + ".time_slot", "> 0", "time slot must be positive");
  if (!(s.net_bandwidth_native > 0)) add(r, p + ".net_bandwidth_native", "> 0", "bandwidth must be positive");
  if (!(s.disk_bandwidth_native.read > 0))
    add(r, p + ".disk_bandwidth_native.read", "> 0", "bandwidth must be positive");
  if (!(s.disk_bandwidth_native.write > 0))
    add(r, p + ".disk_bandwidth_native.write", "> 0", "bandwidth must be positive");
  if (!(s.cpu_rate_native > 0)) add(r, p + ".cpu_rate_native", "> 0", "cpu rate must be positive");
  if (!(s.nfs_cap > 0)) add(r, p + ".nfs_cap", "> 0", "nfs cap must be positive");
  return r;
}

ValidationReport validate_app(const AppSpec& app) {
  ValidationReport r;
  if (app.name.empty()) add(r, "app.name", "non-empty", "application name must be non-empty");
  if (const auto* img = std::get_if<ImageRef>(&app.container_source); img && img->ref.empty())
    add(r, "app.container_source.image_ref", "non-empty", "image reference must be non-empty");
  if (const auto* bf = std::get_if<Buildfile>(&app.container_source); bf && bf->path.empty())
    add(r, "app.container_source.buildfile", "non-empty", "buildfile path must be non-empty");
  if (app.process_count < 1) add(r, "app.process_count", ">= 1", "process count must be at least 1");
  if (!(app.work_total > 0)) add(r, "app.work_total", "> 0", "work total must be positive");
  if (app.comm_pattern.kind == CommPattern::Kind::mixed &&
      !(app.comm_pattern.ratio >= 0.0 && app.comm_pattern.ratio <= 1.0))
    add(r, "app.comm_pattern.ratio", "in [0,1]", "mixed ratio must lie in [0,1]");
  return r;
}

ValidationReport validate_uconf(const HardwareConfig& u) {
  ValidationReport r;
  if (u.vcpus < 1) add(r, "uconf.vcpus", ">= 1", "at least one vcpu is required");
  if (u.ram_mb < 1) add(r, "uconf.ram_mb", ">= 1", "ram must be at least 1 MB");
  if (u.ssh_base_port < 1024 || u.ssh_base_port >= 65535)
    add(r, "uconf.ssh_base_port", "in [1024, 65535)", "ssh base port out of range");
  return r;
}

ValidationReport validate(const ResourcePool& pool, const AppSpec& app, const HardwareConfig& uconf) {
  ValidationReport r;
  if (pool.systems.empty()) add(r, "pool.systems", "non-empty", "pool.systems non-empty");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < pool.systems.size(); ++i) {
    const auto& s = pool.systems[i];
    auto sub = validate_system(s, "pool.systems[" + std::to_string(i) + "]");
    r.insert(r.end(), sub.begin(), sub.end());
    if (!s.id.empty() && !ids.insert(s.id).second)
      add(r, "pool.systems", "unique ids", "duplicate system id '" + s.id + "'");
  }

  auto a = validate_app(app);
  r.insert(r.end(), a.begin(), a.end());
  auto u = validate_uconf(uconf);
  r.insert(r.end(), u.begin(), u.end());

  if (!pool.systems.empty() && app.process_count >= 1) {
    const bool placeable = std::any_of(pool.systems.begin(), pool.systems.end(), [&](const ComputeSystem& s) {
      return static_cast<int>(s.hosts.size()) >= app.process_count;
    });
    if (!placeable)
      add(r, "app.process_count", "insufficient hosts",
          "no system has " + std::to_string(app.process_count) + " hosts for one node per host");
  }
  return r;
}

void check_run_state(const RunState& state, double work_total) {
  if (state.phase == RunPhase::complete && state.progress != work_total)
    throw Error("run state: complete but progress != work_total");
  if (state.need_migration && !state.last_host_system)
    throw Error("run state: need_migration without last host");
  if (state.progress < 0 || state.progress > work_total) throw Error("run state: progress out of range");
}

}  // namespace bee
