#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tir/backends.hpp"
#include "tir/image.hpp"

namespace tir::testing {

/// Self-deleting scratch directory.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Deterministic striped test picture; distinct seeds give distinct images.
Image pattern_image(int width, int height, unsigned seed);

/// Twelve-item hermetic benchmark on disk: dataset, images, scripted
/// policy, retrieval manifest and index, and a fixture store recorded from
/// static search/fetch backends and an exact-match judge.
struct MiniBench {
  std::filesystem::path root;
  std::filesystem::path dataset;
  std::filesystem::path script;
  std::filesystem::path manifest;
  std::filesystem::path index;
  std::filesystem::path fixtures;
  std::filesystem::path config;
  std::size_t items = 0;
  std::size_t max_rounds = 3;
};

std::shared_ptr<StaticSearchBackend> mini_bench_search();
std::shared_ptr<StaticFetchBackend> mini_bench_pages();

/// Writes everything under `root` and records the fixtures.
MiniBench build_mini_bench(const std::filesystem::path& root);

}  // namespace tir::testing
