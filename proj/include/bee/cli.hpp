#pragma once

// The `bee` command line. Exit codes:
//   0  completed (or the command succeeded)
//   1  run failed, or the checkpoint is corrupt
//   2  run stalled with a checkpoint (its manifest path is printed)
//   64 invalid configuration, missing file or malformed trace

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bee/backend.hpp"
#include "bee/model.hpp"

namespace bee::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitStalled = 2;
inline constexpr int kExitConfig = 64;

enum class Format { text, json };

struct CliConfig {
  std::filesystem::path pool_file;
  std::filesystem::path app_file;
  std::filesystem::path uconf_file;
  std::filesystem::path store_dir;
  std::uint64_t seed = 0;
  Format format = Format::text;
};

struct LoadedConfig {
  ResourcePool pool;
  AppSpec app;
  HardwareConfig uconf;
  std::optional<BackendConfig> backend;  // from the pool file's "backend" object
};

/// Reads and parses the three config files; throws Error naming the file.
LoadedConfig load_config(const CliConfig& config);

/// Entry point used by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bee::cli
