#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace capreason {

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(std::string_view text);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

// Standard base64, no line wrapping. Decoding skips ASCII whitespace so
// wrapped payloads from other producers still round-trip.
std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Digest of the compact dump of a JSON value. nlohmann keeps object keys
// sorted, so structurally equal values serialize identically.
std::string canonical_json_digest(const nlohmann::json& value);

std::string trim_copy(std::string_view text);
std::string lower_copy(std::string_view text);
bool has_upper_ascii(std::string_view text);

std::string iso8601_utc_now();

}  // namespace capreason
