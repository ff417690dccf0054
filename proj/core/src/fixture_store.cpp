#include "tir/fixture_store.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tir/error.hpp"

namespace tir {

FixtureMode parse_fixture_mode(std::string_view text) {
  if (text == "off" || text.empty()) return FixtureMode::Off;
  if (text == "record") return FixtureMode::Record;
  if (text == "replay" || text == "replay-strict") return FixtureMode::Replay;
  if (text == "replay-lenient") return FixtureMode::ReplayLenient;
  throw Error(ErrorCode::ConfigError, fmt::format("unknown fixture mode '{}'", text));
}

std::string_view to_string(FixtureMode mode) {
  switch (mode) {
    case FixtureMode::Off: return "off";
    case FixtureMode::Record: return "record";
    case FixtureMode::Replay: return "replay";
    case FixtureMode::ReplayLenient: return "replay-lenient";
  }
  return "off";
}

namespace {

std::string record_key(std::string_view tool, const Json& args) {
  return fmt::format("{}\n{}", tool, canonical_dump(args));
}

}  // namespace

FixtureStore::FixtureStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path FixtureStore::path_for(std::string_view tool, const Json& args) const {
  return root_ / std::string(tool) / (sha256_hex(record_key(tool, args)) + ".json");
}

std::optional<Json> FixtureStore::lookup(std::string_view tool, const Json& args) const {
  const auto path = path_for(tool, args);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::StoreCorrupt, fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat || doc.value("tool", "") != tool ||
      !doc.contains("args") || canonical_dump(doc["args"]) != canonical_dump(args) || !doc.contains("response")) {
    throw Error(ErrorCode::StoreCorrupt, fmt::format("{}: header does not match request", path.string()));
  }
  return doc["response"];
}

void FixtureStore::put(std::string_view tool, const Json& args, const Json& response) {
  const Json doc{{"format", kFormat}, {"tool", tool}, {"args", args}, {"response", response}};
  std::lock_guard lock(write_mu_);
  write_file_atomic(path_for(tool, args), doc.dump(2, ' ', false, Json::error_handler_t::replace) + "\n");
}

Json FixtureStore::resolve(FixtureMode mode, std::string_view tool, const Json& args,
                           const std::function<Json()>& live) {
  switch (mode) {
    case FixtureMode::Off:
      return live();
    case FixtureMode::Record: {
      Json response = live();
      put(tool, args, response);
      return response;
    }
    case FixtureMode::Replay:
    case FixtureMode::ReplayLenient: {
      if (auto hit = lookup(tool, args)) return *hit;
      ++misses_;
      {
        std::lock_guard lock(miss_mu_);
        missed_.push_back(record_key(tool, args));
      }
      if (mode == FixtureMode::Replay) {
        throw Error(ErrorCode::FixtureMiss, fmt::format("no fixture for {} {}", tool, canonical_dump(args)));
      }
      spdlog::warn("fixture miss for {} {}; serving empty result", tool, canonical_dump(args));
      return nullptr;
    }
  }
  return live();
}

FixtureStore::VerifyReport FixtureStore::verify() const {
  VerifyReport report;
  std::error_code ec;
  if (!std::filesystem::exists(root_, ec)) return report;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    ++report.records;
    try {
      const Json doc = Json::parse(read_file(file));
      const std::string tool = doc.at("tool").get<std::string>();
      if (doc.at("format") != kFormat || path_for(tool, doc.at("args")) != file || !doc.contains("response")) {
        report.corrupt.push_back(file.string());
      }
    } catch (const std::exception&) {
      report.corrupt.push_back(file.string());
    }
  }
  return report;
}

std::vector<std::string> FixtureStore::missed_keys() const {
  std::lock_guard lock(miss_mu_);
  return missed_;
}

}  // namespace tir
