#include "bee/storage.hpp"

#include <algorithm>
#include <fstream>

#include "bee/digest.hpp"

namespace bee::storage {

void to_json(json& j, const StoragePlan& p) {
  j = json{{"solution", to_string(p.solution)},
           {"master_node", p.master_node ? json(*p.master_node) : json(nullptr)},
           {"mount_path", p.mount_path},
           {"native_read", p.native_read},
           {"native_write", p.native_write},
           {"nfs_cap", p.nfs_cap},
           {"native_shared_fs", p.native_shared_fs}};
}

void from_json(const json& j, StoragePlan& p) {
  p.solution = parse_storage_solution(j.at("solution").get<std::string>());
  if (j.contains("master_node") && !j.at("master_node").is_null()) {
    p.master_node = j.at("master_node").get<int>();
  } else {
    p.master_node.reset();
  }
  p.mount_path = j.value("mount_path", std::string("/bee/data"));
  p.native_read = j.at("native_read").get<double>();
  p.native_write = j.at("native_write").get<double>();
  p.nfs_cap = j.value("nfs_cap", kDefaultNfsCap);
  p.native_shared_fs = j.value("native_shared_fs", false);
}

void check_plan(const StoragePlan& plan) {
  if (!(plan.native_read > 0) || !(plan.native_write > 0) || !(plan.nfs_cap > 0))
    throw Error("storage plan bandwidths must be positive");
  if (plan.solution == StorageSolution::data_image_nfs && !plan.master_node)
    throw Error("data_image_nfs plan needs a master node");
}

StoragePlan make_plan(StorageSolution solution, const ComputeSystem& system, bool native_shared_fs) {
  StoragePlan p;
  p.solution = solution;
  p.master_node = 0;
  p.native_read = system.disk_bandwidth_native.read;
  p.native_write = system.disk_bandwidth_native.write;
  p.nfs_cap = system.nfs_cap;
  p.native_shared_fs = native_shared_fs;
  return p;
}

double effective_bandwidth(const StoragePlan& plan, int node, IoOp op, int n_nodes,
                           std::optional<int> active_workers) {
  check_plan(plan);
  if (n_nodes < 1 || node < 0 || node >= n_nodes)
    throw Error("unknown node " + std::to_string(node) + " in a cluster of " + std::to_string(n_nodes));
  const double native = op == IoOp::read ? plan.native_read : plan.native_write;
  if (plan.native_shared_fs) return native;

  switch (plan.solution) {
    case StorageSolution::virtio_passthrough:
      return op == IoOp::read ? native : kVirtioWriteFactor * native;
    case StorageSolution::data_image_nfs: {
      if (node == *plan.master_node) return native;
      const int workers = std::max(1, active_workers.value_or(n_nodes - 1));
      return std::min(native, plan.nfs_cap / workers);
    }
  }
  return native;
}

double model_io(const StoragePlan& plan, int node, IoOp op, std::uint64_t bytes, int n_nodes,
                std::optional<int> active_workers) {
  const double bw = effective_bandwidth(plan, node, op, n_nodes, active_workers);
  if (bytes == 0) return 0.0;
  return static_cast<double>(bytes) / kBytesPerMB / bw;
}

void to_json(json& j, const IoBenchRow& r) {
  j = json{{"n_nodes", r.n_nodes},
           {"master_write", r.master_write},
           {"master_read", r.master_read},
           {"worker_write", r.worker_write},
           {"worker_read", r.worker_read},
           {"worker_aggregate_write", r.worker_aggregate_write},
           {"worker_aggregate_read", r.worker_aggregate_read},
           {"aggregate_write", r.aggregate_write},
           {"aggregate_read", r.aggregate_read}};
}

std::vector<IoBenchRow> io_bench(const StoragePlan& plan, int max_nodes, std::uint64_t bytes_per_node) {
  std::vector<IoBenchRow> rows;
  const double mb = static_cast<double>(bytes_per_node) / kBytesPerMB;
  const int master = plan.master_node.value_or(0);
  for (int n = 1; n <= max_nodes; ++n) {
    IoBenchRow r;
    r.n_nodes = n;
    r.master_write = mb / model_io(plan, master, IoOp::write, bytes_per_node, n);
    r.master_read = mb / model_io(plan, master, IoOp::read, bytes_per_node, n);
    if (n > 1) {
      const int worker = master == 0 ? 1 : 0;
      r.worker_write = mb / model_io(plan, worker, IoOp::write, bytes_per_node, n);
      r.worker_read = mb / model_io(plan, worker, IoOp::read, bytes_per_node, n);
      r.worker_aggregate_write = r.worker_write * (n - 1);
      r.worker_aggregate_read = r.worker_read * (n - 1);
    }
    r.aggregate_write = r.master_write + r.worker_aggregate_write;
    r.aggregate_read = r.master_read + r.worker_aggregate_read;
    rows.push_back(r);
  }
  return rows;
}

VolumeStore::VolumeStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "volumes");
}

VolumeStore::Meta VolumeStore::load(const std::string& id) const {
  const auto path = dir(id) / "meta.json";
  if (!std::filesystem::exists(path)) throw Error("no volume '" + id + "'");
  const auto j = read_json_file(path);
  Meta m;
  m.volume = j.get<DataVolume>();
  m.io_active = j.value("io_active", false);
  return m;
}

void VolumeStore::save(const Meta& meta) const {
  json j = meta.volume;
  j["io_active"] = meta.io_active;
  write_json_file(dir(meta.volume.id) / "meta.json", j);
}

DataVolume VolumeStore::create(const std::string& id, const Bytes& content, const std::string& location) {
  std::lock_guard lock(mutex_);
  if (id.empty() || id.find('/') != std::string::npos) throw Error("bad volume id '" + id + "'");
  std::filesystem::create_directories(dir(id));
  write_file_bytes(dir(id) / "data.bin", content);
  Meta m;
  m.volume = DataVolume{id, content.size(), sha256_hex(content), location};
  save(m);
  return m.volume;
}

bool VolumeStore::exists(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return std::filesystem::exists(dir(id) / "meta.json");
}

DataVolume VolumeStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return load(id).volume;
}

Bytes VolumeStore::read(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto meta = load(id);
  auto content = read_file_bytes(dir(id) / "data.bin");
  if (sha256_hex(content) != meta.volume.content_digest) throw Error("volume '" + id + "' fails its digest check");
  return content;
}

DataVolume VolumeStore::write(const std::string& id, const Bytes& content) {
  std::lock_guard lock(mutex_);
  auto meta = load(id);
  write_file_bytes(dir(id) / "data.bin", content);
  meta.volume.byte_size = content.size();
  meta.volume.content_digest = sha256_hex(content);
  save(meta);
  return meta.volume;
}

DataVolume VolumeStore::attach(const std::string& id, const std::string& location) {
  std::lock_guard lock(mutex_);
  auto meta = load(id);
  if (location == kDetached) throw Error("cannot attach to '" + std::string(kDetached) + "'");
  if (meta.volume.location != kDetached)
    throw Error("volume '" + id + "' is already attached to " + meta.volume.location);
  meta.volume.location = location;
  save(meta);
  return meta.volume;
}

DataVolume VolumeStore::detach(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto meta = load(id);
  if (meta.volume.location == kDetached) throw Error("volume '" + id + "' is not attached");
  if (meta.io_active) throw Error("volume '" + id + "' has I/O in flight");
  meta.volume.location = kDetached;
  save(meta);
  return meta.volume;
}

void VolumeStore::set_io_active(const std::string& id, bool active) {
  std::lock_guard lock(mutex_);
  auto meta = load(id);
  meta.io_active = active;
  save(meta);
}

Snapshot VolumeStore::snapshot(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto meta = load(id);
  if (meta.volume.location == kDetached) throw Error("cannot snapshot detached volume '" + id + "'");
  Snapshot s;
  s.volume_id = id;
  s.content = read_file_bytes(dir(id) / "data.bin");
  s.digest = sha256_hex(s.content);
  return s;
}

void VolumeStore::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  std::filesystem::remove_all(dir(id));
}

json manifest_json(const Checkpoint& c) {
  return json{{"run_id", c.run_id},
              {"seq", c.seq},
              {"progress", c.progress},
              {"digest", c.digest},
              {"origin_system", c.origin_system},
              {"created_at", c.created_at}};
}

Checkpoint CheckpointStore::write(const std::string& run_id, int seq, double progress,
                                  const std::string& origin_system, double created_at, const Bytes& content) {
  Checkpoint c;
  c.run_id = run_id;
  c.seq = seq;
  c.progress = progress;
  c.digest = sha256_hex(content);
  c.origin_system = origin_system;
  c.created_at = created_at;
  c.byte_size = content.size();
  c.dir = root_ / run_id / std::to_string(seq);
  std::filesystem::create_directories(c.dir);
  write_file_bytes(c.volume_path(), content);
  write_json_file(c.manifest_path(), manifest_json(c));
  return c;
}

std::optional<Checkpoint> CheckpointStore::latest(const std::string& run_id) const {
  const auto base = root_ / run_id;
  if (!std::filesystem::is_directory(base)) return std::nullopt;
  std::optional<int> best;
  for (const auto& entry : std::filesystem::directory_iterator(base)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
    if (!std::filesystem::exists(entry.path() / "manifest.json")) continue;
    const int seq = std::stoi(name);
    if (!best || seq > *best) best = seq;
  }
  if (!best) return std::nullopt;
  return load(base / std::to_string(*best));
}

Checkpoint CheckpointStore::load(const std::filesystem::path& path) {
  const auto dir = std::filesystem::is_directory(path) ? path : path.parent_path();
  const auto j = read_json_file(dir / "manifest.json");
  Checkpoint c;
  c.run_id = j.at("run_id").get<std::string>();
  c.seq = j.at("seq").get<int>();
  c.progress = j.at("progress").get<double>();
  c.digest = j.at("digest").get<std::string>();
  c.origin_system = j.at("origin_system").get<std::string>();
  c.created_at = j.at("created_at").get<double>();
  c.dir = dir;
  c.byte_size = std::filesystem::exists(c.volume_path()) ? std::filesystem::file_size(c.volume_path()) : 0;
  return c;
}

Bytes CheckpointStore::read_verified(const Checkpoint& checkpoint) {
  if (!std::filesystem::exists(checkpoint.volume_path()))
    throw CorruptCheckpoint("checkpoint corrupt: " + checkpoint.volume_path().string() + " missing");
  auto content = read_file_bytes(checkpoint.volume_path());
  if (sha256_hex(content) != checkpoint.digest)
    throw CorruptCheckpoint("checkpoint corrupt: digest mismatch in " + checkpoint.dir.string());
  return content;
}

}  // namespace bee::storage
