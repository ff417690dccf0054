#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tir/backends.hpp"
#include "tir/concurrency.hpp"
#include "tir/embedding.hpp"
#include "tir/fixture_store.hpp"
#include "tir/image.hpp"
#include "tir/json_util.hpp"
#include "tir/retrieval.hpp"
#include "tir/sandbox.hpp"
#include "tir/trajectory.hpp"

namespace tir {

inline constexpr std::string_view kToolCrop = "im_zoom_in";
inline constexpr std::string_view kToolVisualSearch = "zoom_v_search";
inline constexpr std::string_view kToolWebSearch = "web_search";
inline constexpr std::string_view kToolUrlVisit = "url_visit";
inline constexpr std::string_view kToolCode = "code_interpreter";

inline constexpr std::size_t kMaxSearchResults = 10;

enum class ToolResultKind { Text, Image, Structured };

std::string_view to_string(ToolResultKind kind);

struct ToolResult {
  ToolResultKind kind = ToolResultKind::Text;
  std::variant<std::string, Image, Json> payload;
  /// Wall time of the call; not part of the serialized form.
  std::chrono::microseconds latency{0};

  static ToolResult text(std::string s);
  static ToolResult image(Image img);
  static ToolResult structured(Json j);

  /// Text handed back to the policy. Images become a placeholder.
  [[nodiscard]] std::string observation_text() const;
  [[nodiscard]] Json to_json() const;
  /// Throws Error(StoreCorrupt) on a malformed document.
  static ToolResult from_json(const Json& j);
};

enum class ArgType { String, Integer, BBox, Window };

struct ArgSpec {
  std::string name;
  ArgType type;
  bool required;
  std::string description;
  std::vector<std::string> aliases = {};
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<ArgSpec> args;

  /// Function-calling style card.
  [[nodiscard]] Json to_json() const;
};

/// The five tool cards.
const std::vector<ToolSpec>& builtin_tool_specs();

/// Checks arguments against the spec and returns them normalized: aliases
/// renamed, unknown keys dropped, boxes and windows as integer arrays.
/// Throws Error(ArgValidation).
Json validate_arguments(const ToolSpec& spec, const Json& arguments);

Json bbox_to_json(const BBox& b);

ToolResult crop_zoom(const Image& image, const BBox& box);

/// Renders "名称：<name>, 检索置信度：<confidence>".
std::string render_visual_search(const std::string& name, double confidence);
ToolResult visual_search(const Image& image, const BBox& box, Category category, EmbedBackend& embedder,
                         const Index& index);

/// At most ten items, ids renumbered 1..n in rank order.
std::vector<SearchResultItem> web_search(const std::string& query, SearchBackend& backend);
Json web_search_observation(const std::string& query, const std::vector<SearchResultItem>& items);

struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Full text, a half-open code-point window of it, or a goal-directed
/// summary (restricted to the window when one is given). Throws
/// Error(ArgValidation) for a malformed URL, Error(WindowOutOfRange),
/// Error(FetchFailure), Error(AssistantFailure).
ToolResult url_visit(const std::string& url, const std::optional<Window>& window, const std::optional<std::string>& goal,
                     FetchBackend& fetch, AssistantBackend* assistant);

ToolResult code_interpreter(const std::string& code, const SandboxLimits& limits);

struct RateLimit {
  std::size_t max_inflight = 16;
  std::chrono::milliseconds min_interval{0};
};

struct ToolBackends {
  std::shared_ptr<SearchBackend> search;
  std::shared_ptr<FetchBackend> fetch;
  std::shared_ptr<AssistantBackend> assistant;
  std::shared_ptr<EmbedBackend> embedder;
  std::shared_ptr<const Index> index;
  SandboxLimits sandbox;
  /// Network tools (web_search, url_visit) are routed through the store.
  std::shared_ptr<FixtureStore> fixtures;
  FixtureMode fixture_mode = FixtureMode::Off;
};

/// Images visible to the episode: the input image first, then image
/// observations in arrival order. `image_index` selects among them.
struct ToolContext {
  std::vector<Image> images;
};

/// Thread-safe dispatcher over the five tools with per-tool in-flight caps.
class ToolPlatform {
 public:
  ToolPlatform(ToolBackends backends, RateLimit default_limit = {}, std::map<std::string, RateLimit> per_tool = {});

  [[nodiscard]] const std::vector<ToolSpec>& specs() const { return builtin_tool_specs(); }
  [[nodiscard]] const ToolBackends& backends() const { return backends_; }

  /// Throws Error(ToolNotFound), Error(ArgValidation), Error(BackendFailure)
  /// or the typed error of the tool itself; never anything untyped.
  ToolResult dispatch(const ToolInvocation& invocation, const ToolContext& context);

  [[nodiscard]] std::size_t peak_inflight(const std::string& tool) const;

 private:
  ToolResult run(const std::string& name, const Json& args, const ToolContext& context);
  ToolResult run_networked(const std::string& name, const Json& args);

  ToolBackends backends_;
  std::map<std::string, std::unique_ptr<InflightLimiter>> limiters_;
};

}  // namespace tir
