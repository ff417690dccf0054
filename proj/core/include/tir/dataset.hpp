#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tir {

struct BenchItem {
  std::string id;
  std::string category;
  std::string question;
  /// Path (relative to the dataset file) or URL; empty when text-only.
  std::string image;
  std::string ground_truth;
};

/// One JSON object per line: {id, category, question, image?, ground_truth}.
/// Throws Error(ParseError) naming the line, Error(DuplicateId).
std::vector<BenchItem> parse_dataset(std::string_view jsonl);
std::vector<BenchItem> load_dataset(const std::filesystem::path& path);

}  // namespace tir
