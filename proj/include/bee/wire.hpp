#pragma once

// MPI-plane frame format:
//
//   offset 0  u32 BE  payload length
//   offset 4  u16 BE  source node
//   offset 6  u16 BE  destination node
//   offset 8  u16 BE  hop count
//   offset 10 payload
//
// The first frame on a fresh connection is a hello: src = sender,
// dst = kHelloDst, hop_count = 0, empty payload.

#include <cstdint>
#include <optional>
#include <span>

#include "bee/model.hpp"

namespace bee::net {

inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::uint16_t kHelloDst = 0xFFFF;
inline constexpr std::uint32_t kMaxPayload = 16u << 20;

struct Frame {
  std::uint16_t src = 0;
  std::uint16_t dst = 0;
  std::uint16_t hop_count = 0;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

Bytes encode_frame(const Frame& frame);

/// Incremental decoder over a byte stream.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> data);
  /// Next complete frame, if buffered. Throws Error on an oversized length.
  std::optional<Frame> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

}  // namespace bee::net
