#include "bee/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace bee::workload {

namespace {

constexpr std::uint8_t kMagic[8] = {'B', 'E', 'E', 'A', 'P', 'P', '0', '1'};

void put_be64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) {
    out[i] = static_cast<std::uint8_t>(v & 0xFF);
    v >>= 8;
  }
}

std::uint64_t get_be64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in[i];
  return v;
}

}  // namespace

AppState decode(std::span<const std::uint8_t> volume) {
  AppState s;
  if (volume.size() >= kTrailerSize) {
    const auto* t = volume.data() + volume.size() - kTrailerSize;
    const std::uint64_t input_len = get_be64(t + 48);
    if (std::memcmp(t, kMagic, sizeof kMagic) == 0 && input_len == volume.size() - kTrailerSize) {
      s.input.assign(volume.begin(), volume.begin() + static_cast<std::ptrdiff_t>(input_len));
      s.ticks = static_cast<std::int64_t>(get_be64(t + 8));
      std::copy(t + 16, t + 48, s.chain.begin());
      return s;
    }
  }
  s.input.assign(volume.begin(), volume.end());
  s.ticks = 0;
  s.chain = sha256(s.input);
  return s;
}

Bytes encode(const AppState& state) {
  Bytes out(state.input);
  const std::size_t base = out.size();
  out.resize(base + kTrailerSize);
  std::uint8_t* t = out.data() + base;
  std::memcpy(t, kMagic, sizeof kMagic);
  put_be64(t + 8, static_cast<std::uint64_t>(state.ticks));
  std::copy(state.chain.begin(), state.chain.end(), t + 16);
  put_be64(t + 48, state.input.size());
  return out;
}

void advance(AppState& state, std::int64_t target_ticks) {
  if (target_ticks < state.ticks) throw Error("workload cannot run backwards");
  std::uint8_t buf[40];
  for (std::int64_t k = state.ticks; k < target_ticks; ++k) {
    std::copy(state.chain.begin(), state.chain.end(), buf);
    put_be64(buf + 32, static_cast<std::uint64_t>(k));
    state.chain = sha256(buf);
  }
  state.ticks = target_ticks;
}

Bytes advance(std::span<const std::uint8_t> volume, std::int64_t target_ticks) {
  auto state = decode(volume);
  advance(state, target_ticks);
  return encode(state);
}

std::int64_t progress_ticks(std::span<const std::uint8_t> volume) { return decode(volume).ticks; }

std::int64_t total_ticks(double work_total) {
  return static_cast<std::int64_t>(std::ceil(work_total * kTicksPerUnit - 1e-9));
}

std::int64_t ticks_for(double seconds, double work_rate) {
  if (seconds <= 0) return 0;
  return static_cast<std::int64_t>(std::floor(seconds * work_rate * kTicksPerUnit + 1e-9));
}

double to_work(std::int64_t ticks, double work_total) {
  if (ticks >= total_ticks(work_total)) return work_total;
  return static_cast<double>(ticks) / kTicksPerUnit;
}

}  // namespace bee::workload
