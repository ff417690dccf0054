#include "tir/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tir/error.hpp"
#include "tir/image.hpp"

namespace tir {

namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "plant", "animal", "car", "person", "landmark", "vegetable", "cuisine", "logo"};
constexpr char kMagic[8] = {'T', 'I', 'R', 'I', 'D', 'X', '\0', '\0'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error(ErrorCode::StoreCorrupt, "index file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  [[nodiscard]] bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

Embedding read_f32_file(const std::filesystem::path& path) {
  const auto bytes = read_binary_file(path);
  if (bytes.size() % 4 != 0) throw Error(ErrorCode::ParseError, path.string() + ": size is not a multiple of 4");
  Reader r(bytes);
  Embedding v(bytes.size() / 4);
  for (float& x : v) x = r.f32();
  return v;
}

Embedding embedding_from_json(const Json& j, const std::string& where) {
  const Json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("embedding")) throw Error(ErrorCode::ParseError, where + ": missing \"embedding\"");
    arr = &j.at("embedding");
  }
  if (!arr->is_array()) throw Error(ErrorCode::ParseError, where + ": embedding is not an array");
  Embedding v;
  v.reserve(arr->size());
  for (const auto& x : *arr) {
    if (!x.is_number()) throw Error(ErrorCode::ParseError, where + ": non-numeric embedding component");
    v.push_back(x.get<float>());
  }
  return v;
}

Embedding resolve_exemplar(const Json& ref, const std::filesystem::path& base, EmbedBackend& embedder) {
  if (ref.is_object() || ref.is_array()) return embedding_from_json(ref, "inline exemplar");
  if (!ref.is_string()) throw Error(ErrorCode::ParseError, "exemplar must be a path or an inline embedding");
  std::filesystem::path path = ref.get<std::string>();
  if (path.is_relative()) path = base / path;
  const std::string ext = path.extension().string();
  if (ext == ".f32") return read_f32_file(path);
  if (ext == ".json") return embedding_from_json(Json::parse(read_file(path)), path.string());
  return embedder.embed(load_image(path));
}

void check_dim(const Embedding& v, std::size_t dim, const std::string& id) {
  if (v.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("entity {}: exemplar has {} dims, index has {}", id, v.size(), dim));
  }
}

}  // namespace

std::optional<Category> parse_category(std::string_view text) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == text) return static_cast<Category>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Category c) { return kCategoryNames.at(static_cast<std::size_t>(c)); }

const std::array<Category, kCategoryCount>& all_categories() {
  static const std::array<Category, kCategoryCount> all = {Category::Plant,    Category::Animal,   Category::Car,
                                                           Category::Person,   Category::Landmark, Category::Vegetable,
                                                           Category::Cuisine,  Category::Logo};
  return all;
}

IndexManifest parse_manifest(std::string_view jsonl, const std::filesystem::path& base_dir) {
  IndexManifest m;
  m.base_dir = base_dir;
  for_each_jsonl(jsonl, [&](std::size_t line, const Json& j) {
    auto field = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw Error(ErrorCode::ParseError, fmt::format("manifest line {}: missing string field \"{}\"", line, key));
      }
      return j.at(key).get<std::string>();
    };
    ManifestEntry e;
    e.id = field("id");
    e.name = field("name");
    const std::string cat = field("category");
    const auto parsed = parse_category(cat);
    if (!parsed) throw Error(ErrorCode::ArgValidation, fmt::format("manifest line {}: unknown category \"{}\"", line, cat));
    e.category = *parsed;
    if (!j.contains("exemplars") || !j.at("exemplars").is_array()) {
      throw Error(ErrorCode::ParseError, fmt::format("manifest line {}: \"exemplars\" must be an array", line));
    }
    for (const auto& x : j.at("exemplars")) e.exemplars.push_back(x);
    m.entities.push_back(std::move(e));
  });
  return m;
}

IndexManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

Index::Index(std::size_t dim, std::string version) : dim_(dim), version_(std::move(version)) {
  for (Category c : all_categories()) rebuild_partition(c);
}

std::size_t Index::vector_count() const {
  std::size_t n = 0;
  for (const auto& p : partitions_) n += p ? p->owner_of.size() : 0;
  return n;
}

std::size_t Index::vector_count(Category c) const {
  const auto& p = partitions_[static_cast<std::size_t>(c)];
  return p ? p->owner_of.size() : 0;
}

const EntityRecord* Index::find(const std::string& id) const {
  const auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : it->second.get();
}

std::vector<const EntityRecord*> Index::entities() const {
  std::vector<const EntityRecord*> out;
  out.reserve(entities_.size());
  for (const auto& [id, rec] : entities_) out.push_back(rec.get());
  return out;
}

void Index::rebuild_partition(Category c) {
  auto p = std::make_shared<Partition>();
  for (const auto& [id, rec] : entities_) {
    if (rec->category != c) continue;
    const auto owner = static_cast<std::uint32_t>(p->owners.size());
    p->owners.push_back(rec);
    for (const auto& v : rec->exemplars) {
      p->owner_of.push_back(owner);
      p->data.insert(p->data.end(), v.begin(), v.end());
    }
  }
  partitions_[static_cast<std::size_t>(c)] = std::move(p);
}

QueryHit Index::query_top1(std::span<const float> query, Category category) const {
  if (query.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("query has {} dims, index has {}", query.size(), dim_));
  }
  const auto& p = partitions_[static_cast<std::size_t>(category)];
  if (!p || p->owner_of.empty()) {
    throw Error(ErrorCode::EmptyIndexForCategory, fmt::format("no entities for category \"{}\"", to_string(category)));
  }
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t i = 0; i < p->owner_of.size(); ++i) {
    const double s = dot(query, std::span<const float>(p->data.data() + i * dim_, dim_));
    // Owners are sorted by id, so a lower owner index is a smaller id.
    if (s > best_sim || (s == best_sim && p->owner_of[i] < p->owner_of[best])) {
      best_sim = s;
      best = i;
    }
  }
  const EntityRecord& rec = *p->owners[p->owner_of[best]];
  return QueryHit{rec.id, rec.name, best_sim, confidence_from_cosine(best_sim)};
}

Index Index::upsert(const std::vector<EntityRecord>& delta) const {
  Index next = *this;
  std::set<Category> touched;
  for (const EntityRecord& rec : delta) {
    auto copy = std::make_shared<EntityRecord>(rec);
    for (auto& v : copy->exemplars) {
      check_dim(v, dim_, rec.id);
      v = normalized(std::move(v));
    }
    if (const auto it = next.entities_.find(rec.id); it != next.entities_.end()) {
      touched.insert(it->second->category);
    }
    touched.insert(copy->category);
    next.entities_[rec.id] = std::move(copy);
  }
  for (Category c : touched) next.rebuild_partition(c);
  return next;
}

std::vector<std::uint8_t> Index::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(entities_.size()));
  w.u32(static_cast<std::uint32_t>(vector_count()));
  w.u32(static_cast<std::uint32_t>(kCategoryCount));
  w.str(version_);
  std::map<std::string, std::uint32_t> table_index;
  for (const auto& [id, rec] : entities_) {
    table_index.emplace(id, static_cast<std::uint32_t>(table_index.size()));
    w.str(rec->id);
    w.str(rec->name);
    w.u8(static_cast<std::uint8_t>(rec->category));
    w.u32(static_cast<std::uint32_t>(rec->exemplars.size()));
  }
  for (Category c : all_categories()) {
    const auto& p = partitions_[static_cast<std::size_t>(c)];
    const std::size_t n = p ? p->owner_of.size() : 0;
    w.u32(static_cast<std::uint32_t>(c));
    w.u32(static_cast<std::uint32_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      w.u32(table_index.at(p->owners[p->owner_of[i]]->id));
      for (std::size_t k = 0; k < dim_; ++k) w.f32(p->data[i * dim_ + k]);
    }
  }
  return w.take();
}

Index Index::deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.raw(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) throw Error(ErrorCode::StoreCorrupt, "bad index magic");
  if (const auto v = r.u32(); v != kFormatVersion) {
    throw Error(ErrorCode::StoreCorrupt, fmt::format("unsupported index format version {}", v));
  }
  const std::uint32_t dim = r.u32();
  const std::uint32_t n_entities = r.u32();
  const std::uint32_t n_vectors = r.u32();
  const std::uint32_t n_categories = r.u32();
  if (n_categories != kCategoryCount) throw Error(ErrorCode::StoreCorrupt, "unexpected category count");
  Index idx(dim, r.str());

  std::vector<EntityRecord> table(n_entities);
  std::vector<std::uint32_t> expected(n_entities);
  for (std::uint32_t i = 0; i < n_entities; ++i) {
    table[i].id = r.str();
    table[i].name = r.str();
    const std::uint8_t cat = r.u8();
    if (cat >= kCategoryCount) throw Error(ErrorCode::StoreCorrupt, "bad category code");
    table[i].category = static_cast<Category>(cat);
    expected[i] = r.u32();
  }
  std::uint32_t seen = 0;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    if (r.u32() != c) throw Error(ErrorCode::StoreCorrupt, "category blocks out of order");
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t owner = r.u32();
      if (owner >= n_entities || static_cast<std::size_t>(table[owner].category) != c) {
        throw Error(ErrorCode::StoreCorrupt, "vector owner out of range");
      }
      Embedding v(dim);
      for (float& x : v) x = r.f32();
      table[owner].exemplars.push_back(std::move(v));
    }
    seen += n;
  }
  if (seen != n_vectors || !r.done()) throw Error(ErrorCode::StoreCorrupt, "vector count mismatch");
  for (std::uint32_t i = 0; i < n_entities; ++i) {
    if (table[i].exemplars.size() != expected[i]) throw Error(ErrorCode::StoreCorrupt, "exemplar count mismatch");
    if (i > 0 && !(table[i - 1].id < table[i].id)) throw Error(ErrorCode::StoreCorrupt, "entity table not sorted");
    std::string id = table[i].id;
    idx.entities_.emplace(std::move(id), std::make_shared<const EntityRecord>(std::move(table[i])));
  }
  for (Category c : all_categories()) idx.rebuild_partition(c);
  return idx;
}

void Index::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Index Index::load(const std::filesystem::path& path) { return deserialize(read_binary_file(path)); }

bool operator==(const Index& a, const Index& b) {
  if (a.dim_ != b.dim_ || a.version_ != b.version_ || a.entities_.size() != b.entities_.size()) return false;
  return std::equal(a.entities_.begin(), a.entities_.end(), b.entities_.begin(),
                    [](const auto& x, const auto& y) { return x.first == y.first && *x.second == *y.second; });
}

BuildResult build_index(const IndexManifest& manifest, EmbedBackend& embedder) {
  if (manifest.entities.empty()) throw Error(ErrorCode::EmptyManifest, "manifest has no entities");
  const std::size_t dim = manifest.embedding_dim != 0 ? manifest.embedding_dim : embedder.dim();
  BuildResult out;
  std::set<std::string> ids;
  std::vector<EntityRecord> records;
  for (const ManifestEntry& e : manifest.entities) {
    if (!ids.insert(e.id).second) throw Error(ErrorCode::DuplicateId, "duplicate entity id \"" + e.id + "\"");
    EntityRecord rec{e.id, e.name, e.category, {}};
    for (const Json& ref : e.exemplars) {
      Embedding v = resolve_exemplar(ref, manifest.base_dir, embedder);
      check_dim(v, dim, e.id);
      rec.exemplars.push_back(normalized(std::move(v)));
    }
    if (rec.exemplars.empty()) {
      throw Error(ErrorCode::ArgValidation, "entity \"" + e.id + "\" has no exemplars");
    }
    if (rec.exemplars.size() < 3 || rec.exemplars.size() > 10) {
      BuildWarning w{e.id, fmt::format("{} exemplars, outside the recommended range [3, 10]", rec.exemplars.size())};
      spdlog::warn("index build: entity {}: {}", w.entity_id, w.message);
      out.warnings.push_back(std::move(w));
    }
    records.push_back(std::move(rec));
  }
  out.index = Index(dim, manifest.version).upsert(records);
  return out;
}

}  // namespace tir
