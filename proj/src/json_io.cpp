#include "bee/json_io.hpp"

#include <fstream>
#include <iterator>

namespace bee {

void to_json(json& j, const Host& h) { j = json{{"id", h.id}}; }

void from_json(const json& j, Host& h) {
  if (j.is_string()) {
    h.id = j.get<std::string>();
  } else {
    h.id = j.at("id").get<std::string>();
  }
}

void to_json(json& j, const DiskBandwidth& d) { j = json{{"read", d.read}, {"write", d.write}}; }

void from_json(const json& j, DiskBandwidth& d) {
  d.read = j.at("read").get<double>();
  d.write = j.at("write").get<double>();
}

void to_json(json& j, const ComputeSystem& s) {
  j = json{{"id", s.id},
           {"kind", to_string(s.kind)},
           {"hosts", s.hosts},
           {"time_slot", s.time_slot},
           {"kvm_available", s.kvm_available},
           {"host_file_sharing", s.host_file_sharing},
           {"net_bandwidth_native", s.net_bandwidth_native},
           {"disk_bandwidth_native", s.disk_bandwidth_native},
           {"cpu_rate_native", s.cpu_rate_native},
           {"nfs_cap", s.nfs_cap}};
}

void from_json(const json& j, ComputeSystem& s) {
  s.id = j.at("id").get<std::string>();
  s.kind = parse_system_kind(j.value("kind", std::string("hpc")));
  s.hosts = j.at("hosts").get<std::vector<Host>>();
  s.time_slot = j.at("time_slot").get<double>();
  s.kvm_available = j.value("kvm_available", true);
  s.host_file_sharing = j.value("host_file_sharing", true);
  s.net_bandwidth_native = j.at("net_bandwidth_native").get<double>();
  s.disk_bandwidth_native = j.at("disk_bandwidth_native").get<DiskBandwidth>();
  s.cpu_rate_native = j.at("cpu_rate_native").get<double>();
  s.nfs_cap = j.value("nfs_cap", 125.0);
}

void to_json(json& j, const ResourcePool& p) { j = json{{"systems", p.systems}}; }

void from_json(const json& j, ResourcePool& p) { p.systems = j.at("systems").get<std::vector<ComputeSystem>>(); }

void to_json(json& j, const CommPattern& c) {
  if (c.kind == CommPattern::Kind::mixed) {
    j = json{{"kind", "mixed"}, {"ratio", c.ratio}};
  } else {
    j = to_string(c.kind);
  }
}

void from_json(const json& j, CommPattern& c) {
  if (j.is_string()) {
    c.kind = parse_comm_pattern_kind(j.get<std::string>());
    c.ratio = 0.0;
    if (c.kind == CommPattern::Kind::mixed) throw Error("comm_pattern 'mixed' requires a ratio");
    return;
  }
  c.kind = parse_comm_pattern_kind(j.at("kind").get<std::string>());
  if (c.kind == CommPattern::Kind::mixed && !j.contains("ratio")) throw Error("comm_pattern 'mixed' requires a ratio");
  c.ratio = j.value("ratio", 0.0);
}

void to_json(json& j, const IoProfile& io) {
  j = json{{"read_bytes_per_slot", io.read_bytes_per_slot}, {"write_bytes_per_slot", io.write_bytes_per_slot}};
}

void from_json(const json& j, IoProfile& io) {
  io.read_bytes_per_slot = j.value("read_bytes_per_slot", std::uint64_t{0});
  io.write_bytes_per_slot = j.value("write_bytes_per_slot", std::uint64_t{0});
}

void to_json(json& j, const AppSpec& a) {
  json source;
  if (const auto* img = std::get_if<ImageRef>(&a.container_source)) {
    source = json{{"image_ref", img->ref}};
  } else {
    source = json{{"buildfile", std::get<Buildfile>(a.container_source).path}};
  }
  j = json{{"name", a.name},
           {"container_source", source},
           {"entry_command", a.entry_command},
           {"process_count", a.process_count},
           {"comm_pattern", a.comm_pattern},
           {"work_total", a.work_total},
           {"io_profile", a.io_profile},
           {"checkpointable", a.checkpointable}};
}

void from_json(const json& j, AppSpec& a) {
  a.name = j.at("name").get<std::string>();
  const auto& source = j.at("container_source");
  const bool has_image = source.contains("image_ref");
  const bool has_build = source.contains("buildfile");
  if (has_image == has_build) throw Error("container_source must set exactly one of image_ref, buildfile");
  if (has_image) {
    a.container_source = ImageRef{source.at("image_ref").get<std::string>()};
  } else {
    a.container_source = Buildfile{source.at("buildfile").get<std::string>()};
  }
  a.entry_command = j.value("entry_command", std::vector<std::string>{});
  a.process_count = j.at("process_count").get<int>();
  a.comm_pattern = j.contains("comm_pattern") ? j.at("comm_pattern").get<CommPattern>() : CommPattern{};
  a.work_total = j.at("work_total").get<double>();
  a.io_profile = j.contains("io_profile") ? j.at("io_profile").get<IoProfile>() : IoProfile{};
  a.checkpointable = j.value("checkpointable", true);
}

void to_json(json& j, const HardwareConfig& u) {
  j = json{{"vcpus", u.vcpus},
           {"ram_mb", u.ram_mb},
           {"network_solution", to_string(u.network_solution)},
           {"storage_solution", to_string(u.storage_solution)},
           {"ssh_base_port", u.ssh_base_port}};
}

void from_json(const json& j, HardwareConfig& u) {
  u.vcpus = j.at("vcpus").get<int>();
  u.ram_mb = j.at("ram_mb").get<int>();
  u.network_solution = parse_network_solution(j.at("network_solution").get<std::string>());
  u.storage_solution = parse_storage_solution(j.at("storage_solution").get<std::string>());
  u.ssh_base_port = j.value("ssh_base_port", 10022);
}

void to_json(json& j, const DataVolume& v) {
  j = json{{"id", v.id}, {"byte_size", v.byte_size}, {"content_digest", v.content_digest}, {"location", v.location}};
}

void from_json(const json& j, DataVolume& v) {
  v.id = j.at("id").get<std::string>();
  v.byte_size = j.at("byte_size").get<std::uint64_t>();
  v.content_digest = j.at("content_digest").get<std::string>();
  v.location = j.value("location", std::string(kDetached));
}

namespace {
json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
std::optional<std::string> read_optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}
}  // namespace

void to_json(json& j, const RunState& s) {
  j = json{{"phase", to_string(s.phase)},
           {"current_system", optional_string(s.current_system)},
           {"last_host_system", optional_string(s.last_host_system)},
           {"need_migration", s.need_migration},
           {"progress", s.progress},
           {"slots_consumed", s.slots_consumed}};
}

void from_json(const json& j, RunState& s) {
  s.phase = parse_run_phase(j.at("phase").get<std::string>());
  s.current_system = read_optional_string(j, "current_system");
  s.last_host_system = read_optional_string(j, "last_host_system");
  s.need_migration = j.at("need_migration").get<bool>();
  s.progress = j.at("progress").get<double>();
  s.slots_consumed = j.at("slots_consumed").get<int>();
}

void to_json(json& j, const Violation& v) {
  j = json{{"field", v.field}, {"rule", v.rule}, {"message", v.message}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw Error("short write to " + path.string());
}

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace bee
