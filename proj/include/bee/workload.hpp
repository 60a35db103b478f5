#pragma once

// Deterministic application model. A data volume holds the input bytes plus
// a trailer with the iteration counter and a hash-chain state; the state at
// a given iteration depends only on the input and the iteration count, so a
// run interrupted by any sequence of checkpoints ends with the same bytes as
// an uninterrupted one.

#include <cstdint>
#include <span>

#include "bee/digest.hpp"
#include "bee/model.hpp"

namespace bee::workload {

/// Progress is tracked in ticks of 1/256 work-unit.
inline constexpr std::int64_t kTicksPerUnit = 256;
inline constexpr std::size_t kTrailerSize = 56;

struct AppState {
  Bytes input;
  std::int64_t ticks = 0;
  Sha256 chain{};
};

/// A volume without a valid trailer is initial data at tick 0.
AppState decode(std::span<const std::uint8_t> volume);
Bytes encode(const AppState& state);

/// Runs the iteration chain forward to `target_ticks`.
void advance(AppState& state, std::int64_t target_ticks);
Bytes advance(std::span<const std::uint8_t> volume, std::int64_t target_ticks);

std::int64_t progress_ticks(std::span<const std::uint8_t> volume);

std::int64_t total_ticks(double work_total);
std::int64_t ticks_for(double seconds, double work_rate);
double to_work(std::int64_t ticks, double work_total);

}  // namespace bee::workload
