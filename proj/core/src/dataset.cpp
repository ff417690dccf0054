#include "tir/dataset.hpp"

#include <set>

#include <fmt/format.h>

#include "tir/error.hpp"
#include "tir/json_util.hpp"

namespace tir {

std::vector<BenchItem> parse_dataset(std::string_view jsonl) {
  std::vector<BenchItem> items;
  std::set<std::string> ids;
  for_each_jsonl(jsonl, [&](std::size_t line, const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, fmt::format("line {}: expected an object", line));
    auto text = [&](const char* key, bool required) -> std::string {
      if (!j.contains(key) || j.at(key).is_null()) {
        if (required) throw Error(ErrorCode::ParseError, fmt::format("line {}: missing field \"{}\"", line, key));
        return {};
      }
      if (j.at(key).is_number()) return j.at(key).dump();
      if (!j.at(key).is_string()) {
        throw Error(ErrorCode::ParseError, fmt::format("line {}: field \"{}\" must be a string", line, key));
      }
      return j.at(key).get<std::string>();
    };
    BenchItem item{text("id", true), text("category", true), text("question", true), text("image", false),
                   text("ground_truth", true)};
    if (item.ground_truth.empty()) {
      throw Error(ErrorCode::ParseError, fmt::format("line {}: ground_truth is empty", line));
    }
    if (!ids.insert(item.id).second) {
      throw Error(ErrorCode::DuplicateId, fmt::format("line {}: duplicate id \"{}\"", line, item.id));
    }
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<BenchItem> load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

}  // namespace tir
