#include "tir/tool_platform.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tir/error.hpp"
#include "tir/http.hpp"

namespace tir {

namespace {

Json image_to_json(const Image& img) {
  const auto ppm = encode_ppm(img);
  return Json{{"width", img.width}, {"height", img.height}, {"ppm_base64", base64_encode(ppm)}};
}

int bbox_coordinate(const Json& v, const std::string& arg) {
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN / 2 || x > INT32_MAX / 2) throw Error(ErrorCode::ArgValidation, arg + ": coordinate out of range");
    return static_cast<int>(x);
  }
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (!std::isfinite(x) || std::abs(x) > INT32_MAX / 2) {
      throw Error(ErrorCode::ArgValidation, arg + ": coordinate out of range");
    }
    return static_cast<int>(std::lround(x));
  }
  throw Error(ErrorCode::ArgValidation, arg + ": coordinates must be numbers");
}

Json validate_one(const ArgSpec& spec, const Json& v) {
  switch (spec.type) {
    case ArgType::String:
      if (!v.is_string()) throw Error(ErrorCode::ArgValidation, spec.name + " must be a string");
      return v;
    case ArgType::Integer:
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v;
      if (v.is_number_float() && v.get<double>() >= 0 && std::floor(v.get<double>()) == v.get<double>()) {
        return static_cast<std::int64_t>(v.get<double>());
      }
      throw Error(ErrorCode::ArgValidation, spec.name + " must be a non-negative integer");
    case ArgType::BBox: {
      if (!v.is_array() || v.size() != 4) throw Error(ErrorCode::ArgValidation, spec.name + " must be [x1, y1, x2, y2]");
      Json out = Json::array();
      for (const auto& c : v) out.push_back(bbox_coordinate(c, spec.name));
      return out;
    }
    case ArgType::Window: {
      if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::ArgValidation, spec.name + " must be [a, b]");
      Json out = Json::array();
      for (const auto& c : v) {
        const int x = bbox_coordinate(c, spec.name);
        if (x < 0) throw Error(ErrorCode::ArgValidation, spec.name + " bounds must be non-negative");
        out.push_back(x);
      }
      if (out[0].get<int>() > out[1].get<int>()) throw Error(ErrorCode::ArgValidation, spec.name + ": a > b");
      return out;
    }
  }
  return v;
}

BBox bbox_from_json(const Json& j) {
  return BBox{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

const Image& select_image(const ToolContext& ctx, const Json& args) {
  const std::size_t idx = args.contains("image_index") ? args.at("image_index").get<std::size_t>() : 0;
  if (ctx.images.empty()) throw Error(ErrorCode::ArgValidation, "no input image available for this episode");
  if (idx >= ctx.images.size()) {
    throw Error(ErrorCode::ArgValidation, fmt::format("image_index {} out of range ({} images)", idx, ctx.images.size()));
  }
  return ctx.images[idx];
}

Json sentinel_for(const std::string& tool, const Json& args) {
  if (tool == kToolWebSearch) return ToolResult::structured(web_search_observation(args.at("query"), {})).to_json();
  return ToolResult::structured(
             Json{{"visited_url", args.at("url")}, {"mode", args.contains("goal") ? "summarize" : args.contains("window") ? "window" : "full"}, {"result", ""}})
      .to_json();
}

}  // namespace

std::string_view to_string(ToolResultKind kind) {
  switch (kind) {
    case ToolResultKind::Text: return "text";
    case ToolResultKind::Image: return "image";
    case ToolResultKind::Structured: return "structured";
  }
  return "text";
}

ToolResult ToolResult::text(std::string s) { return ToolResult{ToolResultKind::Text, std::move(s), {}}; }
ToolResult ToolResult::image(Image img) { return ToolResult{ToolResultKind::Image, std::move(img), {}}; }
ToolResult ToolResult::structured(Json j) { return ToolResult{ToolResultKind::Structured, std::move(j), {}}; }

std::string ToolResult::observation_text() const {
  switch (kind) {
    case ToolResultKind::Text: return std::get<std::string>(payload);
    case ToolResultKind::Image: return "<image>";
    case ToolResultKind::Structured:
      return std::get<Json>(payload).dump(-1, ' ', false, Json::error_handler_t::replace);
  }
  return {};
}

Json ToolResult::to_json() const {
  Json j{{"kind", to_string(kind)}};
  switch (kind) {
    case ToolResultKind::Text: j["text"] = std::get<std::string>(payload); break;
    case ToolResultKind::Image: j["image"] = image_to_json(std::get<Image>(payload)); break;
    case ToolResultKind::Structured: j["value"] = std::get<Json>(payload); break;
  }
  return j;
}

ToolResult ToolResult::from_json(const Json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "text") return text(j.at("text").get<std::string>());
    if (kind == "structured") return structured(j.at("value"));
    if (kind == "image") {
      const auto bytes = base64_decode(j.at("image").at("ppm_base64").get<std::string>());
      return image(decode_image(bytes));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::StoreCorrupt, std::string("malformed tool result: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::StoreCorrupt, std::string("malformed tool result: ") + e.what());
  }
  throw Error(ErrorCode::StoreCorrupt, "unknown tool result kind");
}

Json ToolSpec::to_json() const {
  Json props = Json::object();
  Json required = Json::array();
  for (const ArgSpec& a : args) {
    Json p{{"description", a.description}};
    switch (a.type) {
      case ArgType::String: p["type"] = "string"; break;
      case ArgType::Integer: p["type"] = "integer"; break;
      case ArgType::BBox:
        p["type"] = "array";
        p["items"] = {{"type", "number"}};
        p["minItems"] = 4;
        p["maxItems"] = 4;
        break;
      case ArgType::Window:
        p["type"] = "array";
        p["items"] = {{"type", "integer"}};
        p["minItems"] = 2;
        p["maxItems"] = 2;
        break;
    }
    props[a.name] = std::move(p);
    if (a.required) required.push_back(a.name);
  }
  return Json{{"type", "function"},
              {"function",
               {{"name", name},
                {"description", description},
                {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

const std::vector<ToolSpec>& builtin_tool_specs() {
  static const std::vector<ToolSpec> specs = {
      {std::string(kToolCrop),
       "Zoom into a region of an input image given a bounding box.",
       {{"bbox_2d", ArgType::BBox, true, "[x1, y1, x2, y2], top-left and bottom-right corners", {"bbox"}},
        {"image_index", ArgType::Integer, false, "which image to crop; 0 is the first input image"}}},
      {std::string(kToolVisualSearch),
       "Ground a region of an input image and return the most similar known entity with a confidence score.",
       {{"bbox_2d", ArgType::BBox, true, "[x1, y1, x2, y2], top-left and bottom-right corners", {"bbox"}},
        {"category", ArgType::String, true,
         "one of plant, animal, car, person, landmark, vegetable, cuisine, logo"},
        {"image_index", ArgType::Integer, false, "which image to search; 0 is the first input image"}}},
      {std::string(kToolWebSearch),
       "Search the web and return the top ranked results.",
       {{"query", ArgType::String, true, "search query"}}},
      {std::string(kToolUrlVisit),
       "Read a web page in full, within a character window, or as a goal-directed summary.",
       {{"url", ArgType::String, true, "page URL"},
        {"window", ArgType::Window, false, "[a, b] character range to read"},
        {"goal", ArgType::String, false, "what to look for; enables summarization"}}},
      {std::string(kToolCode),
       "Run Python code in an isolated sandbox and return stdout, stderr and the value of `result`.",
       {{"code", ArgType::String, true, "Python source"}}},
  };
  return specs;
}

Json validate_arguments(const ToolSpec& spec, const Json& arguments) {
  if (!arguments.is_object()) throw Error(ErrorCode::ArgValidation, spec.name + ": arguments must be an object");
  Json out = Json::object();
  for (const ArgSpec& a : spec.args) {
    const Json* value = nullptr;
    if (arguments.contains(a.name)) value = &arguments.at(a.name);
    for (const auto& alias : a.aliases) {
      if (value == nullptr && arguments.contains(alias)) value = &arguments.at(alias);
    }
    const bool blank_optional =
        value != nullptr && !a.required && (value->is_null() || (value->is_string() && value->get<std::string>().empty()));
    if (value == nullptr || blank_optional) {
      if (a.required) throw Error(ErrorCode::ArgValidation, fmt::format("{}: missing argument \"{}\"", spec.name, a.name));
      continue;
    }
    out[a.name] = validate_one(a, *value);
  }
  if (spec.name == kToolVisualSearch && !parse_category(out.at("category").get<std::string>())) {
    throw Error(ErrorCode::ArgValidation,
                fmt::format("{}: unknown category \"{}\"", spec.name, out.at("category").get<std::string>()));
  }
  return out;
}

Json bbox_to_json(const BBox& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

ToolResult crop_zoom(const Image& image, const BBox& box) { return ToolResult::image(crop(image, box)); }

std::string render_visual_search(const std::string& name, double confidence) {
  return fmt::format("名称：{}, 检索置信度：{}", name, format_confidence(confidence));
}

ToolResult visual_search(const Image& image, const BBox& box, Category category, EmbedBackend& embedder,
                         const Index& index) {
  const Image region = crop(image, box);
  const Embedding q = embedder.embed(region);
  const QueryHit hit = index.query_top1(q, category);
  return ToolResult::text(render_visual_search(hit.name, hit.confidence));
}

std::vector<SearchResultItem> web_search(const std::string& query, SearchBackend& backend) {
  auto items = backend.search(query);
  if (items.size() > kMaxSearchResults) items.resize(kMaxSearchResults);
  for (std::size_t i = 0; i < items.size(); ++i) items[i].id = static_cast<int>(i + 1);
  return items;
}

Json web_search_observation(const std::string& query, const std::vector<SearchResultItem>& items) {
  Json results = Json::array();
  for (const auto& it : items) results.push_back(to_json(it));
  return Json{{"search_query", query}, {"search_result", results}};
}

ToolResult url_visit(const std::string& url, const std::optional<Window>& window, const std::optional<std::string>& goal,
                     FetchBackend& fetch, AssistantBackend* assistant) {
  const auto parsed = parse_url(url);
  if (!parsed) throw Error(ErrorCode::ArgValidation, "not an http(s) URL: " + url);
  std::string text = fetch.fetch_text(url);
  if (window) {
    const std::size_t len = utf8::length(text);
    if (window->begin > len) {
      throw Error(ErrorCode::WindowOutOfRange,
                  fmt::format("window start {} beyond text length {}", window->begin, len));
    }
    const std::size_t end = std::min(window->end, len);
    text = std::string(utf8::substr(text, window->begin, end));
  }
  if (goal) {
    if (assistant == nullptr) throw Error(ErrorCode::AssistantFailure, "no assistant backend configured");
    Json summary = normalize_summary(assistant->summarize(*goal, text));
    return ToolResult::structured(Json{{"visited_url", url}, {"mode", "summarize"}, {"result", std::move(summary)}});
  }
  return ToolResult::structured(Json{{"visited_url", url}, {"mode", window ? "window" : "full"}, {"result", text}});
}

ToolResult code_interpreter(const std::string& code, const SandboxLimits& limits) {
  return ToolResult::structured(run_python_sandboxed(code, limits).to_json());
}

ToolPlatform::ToolPlatform(ToolBackends backends, RateLimit default_limit, std::map<std::string, RateLimit> per_tool)
    : backends_(std::move(backends)) {
  for (const ToolSpec& spec : builtin_tool_specs()) {
    RateLimit lim = default_limit;
    if (const auto it = per_tool.find(spec.name); it != per_tool.end()) lim = it->second;
    limiters_.emplace(spec.name, std::make_unique<InflightLimiter>(std::max<std::size_t>(1, lim.max_inflight),
                                                                   lim.min_interval));
  }
}

std::size_t ToolPlatform::peak_inflight(const std::string& tool) const {
  const auto it = limiters_.find(tool);
  return it == limiters_.end() ? 0 : it->second->peak_inflight();
}

ToolResult ToolPlatform::dispatch(const ToolInvocation& invocation, const ToolContext& context) {
  const auto& specs = builtin_tool_specs();
  const auto spec = std::find_if(specs.begin(), specs.end(), [&](const ToolSpec& s) { return s.name == invocation.name; });
  if (spec == specs.end()) throw Error(ErrorCode::ToolNotFound, "unknown tool \"" + invocation.name + "\"");
  const Json args = validate_arguments(*spec, invocation.arguments);

  const auto start = std::chrono::steady_clock::now();
  ToolResult result;
  try {
    InflightLimiter::Permit permit(*limiters_.at(spec->name));
    result = run(spec->name, args, context);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BackendFailure, fmt::format("{}: {}", spec->name, e.what()));
  }
  result.latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
  return result;
}

ToolResult ToolPlatform::run(const std::string& name, const Json& args, const ToolContext& context) {
  if (name == kToolCrop) return crop_zoom(select_image(context, args), bbox_from_json(args.at("bbox_2d")));
  if (name == kToolVisualSearch) {
    if (!backends_.embedder || !backends_.index) {
      throw Error(ErrorCode::BackendFailure, "visual search needs an embedder and a retrieval index");
    }
    return visual_search(select_image(context, args), bbox_from_json(args.at("bbox_2d")),
                         *parse_category(args.at("category").get<std::string>()), *backends_.embedder,
                         *backends_.index);
  }
  if (name == kToolCode) return code_interpreter(args.at("code").get<std::string>(), backends_.sandbox);
  return run_networked(name, args);
}

ToolResult ToolPlatform::run_networked(const std::string& name, const Json& args) {
  auto live = [&]() -> Json {
    if (name == kToolWebSearch) {
      if (!backends_.search) throw Error(ErrorCode::BackendFailure, "no search backend configured");
      const std::string query = args.at("query").get<std::string>();
      return ToolResult::structured(web_search_observation(query, web_search(query, *backends_.search))).to_json();
    }
    if (!backends_.fetch) throw Error(ErrorCode::BackendFailure, "no fetch backend configured");
    std::optional<Window> window;
    if (args.contains("window")) window = Window{args["window"][0].get<std::size_t>(), args["window"][1].get<std::size_t>()};
    std::optional<std::string> goal;
    if (args.contains("goal")) goal = args.at("goal").get<std::string>();
    return url_visit(args.at("url").get<std::string>(), window, goal, *backends_.fetch, backends_.assistant.get())
        .to_json();
  };
  if (!backends_.fixtures || backends_.fixture_mode == FixtureMode::Off) return ToolResult::from_json(live());
  Json stored = backends_.fixtures->resolve(backends_.fixture_mode, name, args, live);
  if (stored.is_null()) stored = sentinel_for(name, args);
  return ToolResult::from_json(stored);
}

}  // namespace tir
