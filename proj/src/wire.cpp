#include "bee/wire.hpp"

#include <string>

namespace bee::net {

namespace {

void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

}  // namespace

Bytes encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw Error("frame payload too large");
  Bytes out;
  out.reserve(kFrameHeaderSize + frame.payload.size());
  const auto len = static_cast<std::uint32_t>(frame.payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>((len >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((len >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>(len & 0xFF));
  put16(out, frame.src);
  put16(out, frame.dst);
  put16(out, frame.hop_count);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> data) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

std::optional<Frame> FrameDecoder::next() {
  if (buffered() < kFrameHeaderSize) return std::nullopt;
  const std::uint8_t* p = buffer_.data() + offset_;
  const std::uint32_t len = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                            (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
  if (len > kMaxPayload) throw Error("frame length " + std::to_string(len) + " exceeds limit");
  if (buffered() < kFrameHeaderSize + len) return std::nullopt;
  Frame f;
  f.src = get16(p + 4);
  f.dst = get16(p + 6);
  f.hop_count = get16(p + 8);
  f.payload.assign(p + kFrameHeaderSize, p + kFrameHeaderSize + len);
  offset_ += kFrameHeaderSize + len;
  if (offset_ > 65536 && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return f;
}

}  // namespace bee::net
