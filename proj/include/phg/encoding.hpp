#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phg {

/// Standard base64 with padding.
std::string to_base64(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> from_base64(std::string_view text);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view text);

/// Initializes libsodium once; safe to call from any thread.
void ensure_sodium();

}  // namespace phg
