#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tir {

using Json = nlohmann::json;

/// Compact serialization with lexicographically sorted keys. nlohmann's
/// default object type is an ordered map, so this is stable across runs.
std::string canonical_dump(const Json& value);

std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
/// Writes via a sibling temp file and rename so readers never see partial data.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

/// Calls `fn(line_number, record)` for every non-blank line. Line numbers are
/// 1-based. Throws Error(ParseError) naming the line on malformed JSON.
void for_each_jsonl(std::string_view text, const std::function<void(std::size_t, const Json&)>& fn);

namespace utf8 {

inline bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

/// Number of code points (lead bytes) in `text`.
std::size_t length(std::string_view text);

/// Substring by code-point offsets [begin, end). Offsets past the end clamp.
std::string_view substr(std::string_view text, std::size_t begin, std::size_t end);

/// Truncates to at most `max_code_points` code points.
std::string_view prefix(std::string_view text, std::size_t max_code_points);

}  // namespace utf8

}  // namespace tir
