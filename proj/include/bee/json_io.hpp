#pragma once

// JSON encoding of the core types. Field names match the domain types
// (lower_snake_case). Parsing throws nlohmann::json exceptions or bee::Error
// on malformed input.

#include <filesystem>
#include <string>

#include "bee/model.hpp"
#include "json.hpp"

namespace bee {

using nlohmann::json;

void to_json(json& j, const Host& h);
void from_json(const json& j, Host& h);
void to_json(json& j, const DiskBandwidth& d);
void from_json(const json& j, DiskBandwidth& d);
void to_json(json& j, const ComputeSystem& s);
void from_json(const json& j, ComputeSystem& s);
void to_json(json& j, const ResourcePool& p);
void from_json(const json& j, ResourcePool& p);
void to_json(json& j, const CommPattern& c);
void from_json(const json& j, CommPattern& c);
void to_json(json& j, const IoProfile& io);
void from_json(const json& j, IoProfile& io);
void to_json(json& j, const AppSpec& a);
void from_json(const json& j, AppSpec& a);
void to_json(json& j, const HardwareConfig& u);
void from_json(const json& j, HardwareConfig& u);
void to_json(json& j, const DataVolume& v);
void from_json(const json& j, DataVolume& v);
void to_json(json& j, const RunState& s);
void from_json(const json& j, RunState& s);
void to_json(json& j, const Violation& v);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

Bytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const Bytes& bytes);

}  // namespace bee
