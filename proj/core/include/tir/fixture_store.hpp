#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tir/json_util.hpp"

namespace tir {

enum class FixtureMode { Off, Record, Replay, ReplayLenient };

FixtureMode parse_fixture_mode(std::string_view text);
std::string_view to_string(FixtureMode mode);

/// Directory of content-addressed records, one JSON file per (tool, canonical
/// arguments). Each file carries a self-describing header:
///   {"format": "tir-fixture/1", "tool": ..., "args": ..., "response": ...}
/// Reads are lock-free; writes are serialized and atomic (temp file + rename).
class FixtureStore {
 public:
  static constexpr std::string_view kFormat = "tir-fixture/1";

  explicit FixtureStore(std::filesystem::path root);

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }
  [[nodiscard]] std::filesystem::path path_for(std::string_view tool, const Json& args) const;

  /// Throws Error(StoreCorrupt) when the file exists but does not parse or its
  /// header disagrees with the request.
  [[nodiscard]] std::optional<Json> lookup(std::string_view tool, const Json& args) const;
  void put(std::string_view tool, const Json& args, const Json& response);

  /// Routes a backend call through the store according to `mode`:
  /// Off calls `live`; Record calls `live` and persists; Replay serves the
  /// stored response or throws Error(FixtureMiss); ReplayLenient serves a
  /// null sentinel on a miss.
  Json resolve(FixtureMode mode, std::string_view tool, const Json& args, const std::function<Json()>& live);

  struct VerifyReport {
    std::size_t records = 0;
    std::vector<std::string> corrupt;
  };
  /// Re-hashes every record and checks its header.
  [[nodiscard]] VerifyReport verify() const;

  [[nodiscard]] std::size_t miss_count() const { return misses_.load(); }
  [[nodiscard]] std::vector<std::string> missed_keys() const;

 private:
  std::filesystem::path root_;
  std::mutex write_mu_;
  mutable std::mutex miss_mu_;
  std::vector<std::string> missed_;
  std::atomic<std::size_t> misses_{0};
};

}  // namespace tir
