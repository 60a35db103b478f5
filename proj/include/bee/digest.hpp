#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bee {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> data);

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

std::string to_hex(std::span<const std::uint8_t> data);

/// Inverse of to_hex; throws bee::Error on malformed input.
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace bee
