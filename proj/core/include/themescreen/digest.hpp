#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace themescreen {

// Lower-case hex SHA-256 of the input bytes (64 characters).
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Little-endian float64 buffers, as stored in checkpoints and feature files.
std::string encode_f64_le(std::span<const double> values);
std::vector<double> decode_f64_le(std::string_view base64);

// FNV-1a over the bytes, mixed with the seed.
std::uint64_t stable_hash64(std::string_view bytes, std::uint64_t seed);

}  // namespace themescreen
