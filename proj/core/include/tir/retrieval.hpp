#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tir/embedding.hpp"
#include "tir/json_util.hpp"

namespace tir {

enum class Category : std::uint8_t { Plant, Animal, Car, Person, Landmark, Vegetable, Cuisine, Logo };
inline constexpr std::size_t kCategoryCount = 8;

std::optional<Category> parse_category(std::string_view text);
std::string_view to_string(Category c);
const std::array<Category, kCategoryCount>& all_categories();

struct EntityRecord {
  std::string id;
  std::string name;
  Category category = Category::Plant;
  std::vector<Embedding> exemplars;

  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

/// One manifest line: {id, name, category, exemplars: [ref, ...]} where a ref
/// is an image path, a .f32 file of little-endian floats, a .json file holding
/// {"embedding": [...]} or an array, or an inline {"embedding": [...]}.
struct ManifestEntry {
  std::string id;
  std::string name;
  Category category = Category::Plant;
  std::vector<Json> exemplars;
};

struct IndexManifest {
  std::vector<ManifestEntry> entities;
  /// 0 means "take it from the embedding backend".
  std::size_t embedding_dim = 0;
  std::string version = "1";
  /// Relative exemplar paths resolve against this directory.
  std::filesystem::path base_dir;
};

/// Throws Error(ParseError) naming the offending line, Error(ArgValidation)
/// for an unknown category.
IndexManifest parse_manifest(std::string_view jsonl, const std::filesystem::path& base_dir = {});
IndexManifest load_manifest(const std::filesystem::path& path);

struct QueryHit {
  std::string entity_id;
  std::string name;
  double similarity = 0.0;
  double confidence = 0.0;
};

/// Category-partitioned flat index. Values are immutable; upsert returns a
/// new index sharing the untouched partitions.
class Index {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  Index() = default;
  Index(std::size_t dim, std::string version);

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] const std::string& version() const { return version_; }
  [[nodiscard]] std::size_t entity_count() const { return entities_.size(); }
  [[nodiscard]] std::size_t vector_count() const;
  [[nodiscard]] std::size_t vector_count(Category c) const;
  [[nodiscard]] const EntityRecord* find(const std::string& id) const;
  [[nodiscard]] std::vector<const EntityRecord*> entities() const;

  /// Highest cosine over the category's exemplars; ties go to the smaller
  /// entity id. Throws Error(EmptyIndexForCategory), Error(DimensionMismatch).
  [[nodiscard]] QueryHit query_top1(std::span<const float> query, Category category) const;

  /// Replaces records with matching ids and adds the rest. Exemplars are
  /// normalized. Throws Error(DimensionMismatch).
  [[nodiscard]] Index upsert(const std::vector<EntityRecord>& delta) const;

  /// Little-endian layout:
  ///   magic "TIRIDX\0\0"; u32 format version; u32 dim; u32 entity count;
  ///   u32 vector count; u32 category count; u32 tag length + tag bytes;
  ///   entity table sorted by id: (u32 len, id, u32 len, name, u8 category,
  ///   u32 exemplar count)*; then for every category in enum order:
  ///   u32 category, u32 n, n x (u32 entity table index, dim x f32).
  [[nodiscard]] std::vector<std::uint8_t> serialize() const;
  /// Throws Error(StoreCorrupt).
  static Index deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static Index load(const std::filesystem::path& path);

  friend bool operator==(const Index& a, const Index& b);

 private:
  struct Partition {
    std::vector<std::shared_ptr<const EntityRecord>> owners;
    std::vector<std::uint32_t> owner_of;
    std::vector<float> data;
  };
  void rebuild_partition(Category c);

  std::size_t dim_ = 0;
  std::string version_ = "1";
  std::map<std::string, std::shared_ptr<const EntityRecord>> entities_;
  std::array<std::shared_ptr<const Partition>, kCategoryCount> partitions_{};
};

struct BuildWarning {
  std::string entity_id;
  std::string message;
};

struct BuildResult {
  Index index;
  std::vector<BuildWarning> warnings;
};

/// Embeds every exemplar and builds the index. Entities with an exemplar
/// count outside [3, 10] are accepted with a warning. Throws
/// Error(EmptyManifest), Error(DuplicateId), Error(DimensionMismatch).
BuildResult build_index(const IndexManifest& manifest, EmbedBackend& embedder);

}  // namespace tir
