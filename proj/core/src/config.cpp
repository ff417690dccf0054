#include "tir/config.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "tir/backends.hpp"
#include "tir/embedding.hpp"
#include "tir/retrieval.hpp"

namespace tir {

namespace {

void merge_into(Json& base, const Json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw Error(ErrorCode::ConfigError, fmt::format("\"{}\" must be an object", path));
  for (const auto& [key, value] : overlay.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw Error(ErrorCode::ConfigError, fmt::format("unknown configuration key \"{}\"", full));
    Json& slot = base[key];
    if (full == "tools.per_tool") {
      if (!value.is_object()) throw Error(ErrorCode::ConfigError, "\"tools.per_tool\" must be an object");
      for (const auto& [tool, lim] : value.items()) {
        const auto& specs = builtin_tool_specs();
        if (std::none_of(specs.begin(), specs.end(), [&](const ToolSpec& s) { return s.name == tool; })) {
          throw Error(ErrorCode::ConfigError, fmt::format("unknown configuration key \"{}.{}\"", full, tool));
        }
        Json entry = slot.contains(tool) ? slot[tool] : Json{{"max_inflight", 16}, {"min_interval_ms", 0}};
        merge_into(entry, lim, full + "." + tool);
        slot[tool] = std::move(entry);
      }
      continue;
    }
    if (slot.is_object()) {
      merge_into(slot, value, full);
      continue;
    }
    const bool ok = (slot.is_null() && (value.is_null() || value.is_number_integer())) ||
                    (slot.is_boolean() && value.is_boolean()) || (slot.is_string() && value.is_string()) ||
                    (slot.is_number() && value.is_number());
    if (!ok) throw Error(ErrorCode::ConfigError, fmt::format("configuration key \"{}\" has the wrong type", full));
    slot = value;
  }
}

Json overlay_for(const std::string& dotted, Json value) {
  Json out = std::move(value);
  std::string rest = dotted;
  while (true) {
    const std::size_t dot = rest.rfind('.');
    const std::string key = dot == std::string::npos ? rest : rest.substr(dot + 1);
    if (key.empty()) throw Error(ErrorCode::ConfigError, fmt::format("malformed configuration key \"{}\"", dotted));
    out = Json{{key, std::move(out)}};
    if (dot == std::string::npos) break;
    rest = rest.substr(0, dot);
  }
  return out;
}

template <typename T>
T get(const Json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::ConfigError, fmt::format("configuration key \"{}.{}\" is invalid", section, key));
  }
}

std::size_t positive(std::size_t v, const char* name) {
  if (v == 0) throw Error(ErrorCode::ConfigError, fmt::format("\"{}\" must be at least 1", name));
  return v;
}

}  // namespace

HttpEndpoint EndpointConfig::endpoint() const { return HttpEndpoint{url, api_key, std::chrono::milliseconds(timeout_ms)}; }

Json default_config_json() {
  return Json{
      {"policy", {{"url", ""}, {"model", ""}, {"multimodal", false}, {"timeout_ms", 120000}}},
      {"judge",
       {{"url", ""},
        {"model", ""},
        {"backend", "http"},
        {"timeout_ms", 30000},
        {"max_attempts", 3},
        {"initial_backoff_ms", 1000},
        {"max_inflight", 8}}},
      {"search", {{"url", ""}, {"timeout_ms", 30000}}},
      {"fetch", {{"url", ""}, {"timeout_ms", 30000}}},
      {"embed", {{"url", ""}, {"dim", 64}, {"timeout_ms", 30000}}},
      {"sampling", {{"temperature", 0.7}, {"top_p", 0.95}, {"max_tokens", 2048}, {"seed", nullptr}}},
      {"reward", {{"lambda_fmt", 0.1}, {"lambda_halluc", 0.05}}},
      {"grpo", {{"clip_eps", 0.2}, {"std_floor", 1e-6}}},
      {"rollout",
       {{"max_rounds", 10},
        {"group_size", 1},
        {"observation_budget", 8192},
        {"generate_parallelism", 8},
        {"postprocess_workers", 2},
        {"record_timing", true}}},
      {"tools",
       {{"max_inflight", 16},
        {"min_interval_ms", 0},
        {"per_tool", Json::object()},
        {"sandbox_timeout_ms", 10000},
        {"sandbox_memory_mb", 256},
        {"index", ""}}},
      {"fixtures", {{"dir", ""}, {"mode", "off"}}},
  };
}

EnvLookup process_env() {
  return [](std::string_view name) -> std::optional<std::string> {
    const char* v = std::getenv(std::string(name).c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

AppConfig config_from_json(const Json& j) {
  AppConfig c;
  auto endpoint = [&](const char* s) {
    EndpointConfig e;
    e.url = get<std::string>(j, s, "url");
    e.timeout_ms = get<int>(j, s, "timeout_ms");
    if (j.at(s).contains("model")) e.model = get<std::string>(j, s, "model");
    return e;
  };
  c.policy = endpoint("policy");
  c.policy_multimodal = get<bool>(j, "policy", "multimodal");
  c.judge = endpoint("judge");
  c.judge_backend = get<std::string>(j, "judge", "backend");
  if (c.judge_backend != "http" && c.judge_backend != "exact") {
    throw Error(ErrorCode::ConfigError, "\"judge.backend\" must be \"http\" or \"exact\"");
  }
  c.judge_max_attempts = get<int>(j, "judge", "max_attempts");
  if (c.judge_max_attempts < 1) throw Error(ErrorCode::ConfigError, "\"judge.max_attempts\" must be at least 1");
  c.judge_initial_backoff_ms = get<int>(j, "judge", "initial_backoff_ms");
  c.judge_max_inflight = positive(get<std::size_t>(j, "judge", "max_inflight"), "judge.max_inflight");
  c.search = endpoint("search");
  c.fetch = endpoint("fetch");
  c.embed = endpoint("embed");
  c.embed_dim = positive(get<std::size_t>(j, "embed", "dim"), "embed.dim");

  c.sampling.temperature = get<double>(j, "sampling", "temperature");
  c.sampling.top_p = get<double>(j, "sampling", "top_p");
  c.sampling.max_tokens = get<int>(j, "sampling", "max_tokens");
  if (!j.at("sampling").at("seed").is_null()) c.sampling.seed = get<std::uint64_t>(j, "sampling", "seed");
  c.weights.lambda_fmt = get<double>(j, "reward", "lambda_fmt");
  c.weights.lambda_halluc = get<double>(j, "reward", "lambda_halluc");
  c.clip_eps = get<double>(j, "grpo", "clip_eps");
  if (!(c.clip_eps > 0.0)) throw Error(ErrorCode::ConfigError, "\"grpo.clip_eps\" must be positive");
  c.std_floor = get<double>(j, "grpo", "std_floor");

  c.max_rounds = get<std::size_t>(j, "rollout", "max_rounds");
  c.group_size = positive(get<std::size_t>(j, "rollout", "group_size"), "rollout.group_size");
  c.observation_budget = positive(get<std::size_t>(j, "rollout", "observation_budget"), "rollout.observation_budget");
  c.generate_parallelism = positive(get<std::size_t>(j, "rollout", "generate_parallelism"), "rollout.generate_parallelism");
  c.postprocess_workers = positive(get<std::size_t>(j, "rollout", "postprocess_workers"), "rollout.postprocess_workers");
  c.record_timing = get<bool>(j, "rollout", "record_timing");

  c.tool_default.max_inflight = positive(get<std::size_t>(j, "tools", "max_inflight"), "tools.max_inflight");
  c.tool_default.min_interval = std::chrono::milliseconds(get<int>(j, "tools", "min_interval_ms"));
  for (const auto& [tool, lim] : j.at("tools").at("per_tool").items()) {
    RateLimit r;
    r.max_inflight = positive(lim.value("max_inflight", std::size_t{16}), "tools.per_tool.max_inflight");
    r.min_interval = std::chrono::milliseconds(lim.value("min_interval_ms", 0));
    c.tool_limits[tool] = r;
  }
  c.sandbox_timeout_ms = get<int>(j, "tools", "sandbox_timeout_ms");
  c.sandbox_memory_mb = positive(get<std::size_t>(j, "tools", "sandbox_memory_mb"), "tools.sandbox_memory_mb");
  c.index_path = get<std::string>(j, "tools", "index");

  c.fixture_dir = get<std::string>(j, "fixtures", "dir");
  try {
    c.fixture_mode = parse_fixture_mode(get<std::string>(j, "fixtures", "mode"));
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  Json doc = default_config_json();
  if (file) {
    Json parsed;
    try {
      parsed = Json::parse(read_file(*file));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::ConfigError, fmt::format("{}: {}", file->string(), e.what()));
    }
    merge_into(doc, parsed, "");
  }
  static const std::vector<std::pair<const char*, const char*>> env_keys = {
      {"POLICY_URL", "policy.url"}, {"JUDGE_URL", "judge.url"},   {"SEARCH_URL", "search.url"},
      {"FETCH_URL", "fetch.url"},   {"EMBED_URL", "embed.url"},   {"FIXTURE_DIR", "fixtures.dir"},
      {"FIXTURE_MODE", "fixtures.mode"}};
  for (const auto& [var, key] : env_keys) {
    if (auto v = env(var)) merge_into(doc, overlay_for(key, *v), "");
  }
  for (const auto& [key, text] : overrides) {
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::parse_error&) {
      value = text;
    }
    // A string-typed key keeps the literal text, so "--set judge.model=123" stays a string.
    Json probe = default_config_json();
    const Json* slot = &probe;
    std::string rest = key;
    while (slot->is_object()) {
      const std::size_t dot = rest.find('.');
      const std::string head = rest.substr(0, dot);
      if (!slot->contains(head)) break;
      slot = &slot->at(head);
      if (dot == std::string::npos) break;
      rest = rest.substr(dot + 1);
    }
    if (slot->is_string()) value = text;
    merge_into(doc, overlay_for(key, std::move(value)), "");
  }
  AppConfig c = config_from_json(doc);
  auto key = [&](const char* var) { return env(var).value_or(""); };
  c.policy.api_key = key("POLICY_API_KEY");
  c.judge.api_key = key("JUDGE_API_KEY");
  c.search.api_key = key("SEARCH_API_KEY");
  c.fetch.api_key = key("FETCH_API_KEY");
  c.embed.api_key = key("EMBED_API_KEY");
  return c;
}

Json to_json(const AppConfig& c) {
  auto ep = [](const EndpointConfig& e) { return Json{{"url", e.url}, {"timeout_ms", e.timeout_ms}}; };
  Json per_tool = Json::object();
  for (const auto& [tool, r] : c.tool_limits) {
    per_tool[tool] = {{"max_inflight", r.max_inflight}, {"min_interval_ms", r.min_interval.count()}};
  }
  Json j = default_config_json();
  j["policy"] = ep(c.policy);
  j["policy"]["model"] = c.policy.model;
  j["policy"]["multimodal"] = c.policy_multimodal;
  j["judge"] = ep(c.judge);
  j["judge"].update({{"model", c.judge.model},
                     {"backend", c.judge_backend},
                     {"max_attempts", c.judge_max_attempts},
                     {"initial_backoff_ms", c.judge_initial_backoff_ms},
                     {"max_inflight", c.judge_max_inflight}});
  j["search"] = ep(c.search);
  j["fetch"] = ep(c.fetch);
  j["embed"] = ep(c.embed);
  j["embed"]["dim"] = c.embed_dim;
  j["sampling"] = {{"temperature", c.sampling.temperature},
                   {"top_p", c.sampling.top_p},
                   {"max_tokens", c.sampling.max_tokens},
                   {"seed", c.sampling.seed ? Json(*c.sampling.seed) : Json(nullptr)}};
  j["reward"] = {{"lambda_fmt", c.weights.lambda_fmt}, {"lambda_halluc", c.weights.lambda_halluc}};
  j["grpo"] = {{"clip_eps", c.clip_eps}, {"std_floor", c.std_floor}};
  j["rollout"] = {{"max_rounds", c.max_rounds},
                  {"group_size", c.group_size},
                  {"observation_budget", c.observation_budget},
                  {"generate_parallelism", c.generate_parallelism},
                  {"postprocess_workers", c.postprocess_workers},
                  {"record_timing", c.record_timing}};
  j["tools"] = {{"max_inflight", c.tool_default.max_inflight},
                {"min_interval_ms", c.tool_default.min_interval.count()},
                {"per_tool", per_tool},
                {"sandbox_timeout_ms", c.sandbox_timeout_ms},
                {"sandbox_memory_mb", c.sandbox_memory_mb},
                {"index", c.index_path}};
  j["fixtures"] = {{"dir", c.fixture_dir}, {"mode", to_string(c.fixture_mode)}};
  return j;
}

std::string config_hash(const AppConfig& c) { return sha256_hex(canonical_dump(to_json(c))); }

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::JudgeUnreachable:
    case ErrorCode::BackendFailure:
    case ErrorCode::Timeout:
    case ErrorCode::FetchFailure:
    case ErrorCode::AssistantFailure:
    case ErrorCode::SandboxTimeout:
    case ErrorCode::SandboxViolation:
    case ErrorCode::LaunchFailure:
    case ErrorCode::FixtureMiss:
    case ErrorCode::PolicyFailure:
      return 3;
    case ErrorCode::PayloadUnparsable:
    case ErrorCode::MissingField:
    case ErrorCode::VerdictUnparsable:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::ToolNotFound:
    case ErrorCode::ArgValidation:
    case ErrorCode::InvalidBBox:
    case ErrorCode::ImageDecode:
    case ErrorCode::EmptyIndexForCategory:
    case ErrorCode::WindowOutOfRange:
    case ErrorCode::StoreCorrupt:
    case ErrorCode::DuplicateId:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmptyManifest:
    case ErrorCode::ParseError:
    case ErrorCode::EmptyInput:
    case ErrorCode::IdMismatch:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
      return 2;
  }
  return 1;
}

std::shared_ptr<FixtureStore> make_fixture_store(const AppConfig& c) {
  if (c.fixture_dir.empty()) {
    if (c.fixture_mode != FixtureMode::Off) {
      throw Error(ErrorCode::ConfigError, "fixture mode is set but no fixture directory was given");
    }
    return nullptr;
  }
  return std::make_shared<FixtureStore>(c.fixture_dir);
}

std::shared_ptr<ToolPlatform> make_tool_platform(const AppConfig& c, std::shared_ptr<FixtureStore> store) {
  ToolBackends b;
  if (!c.search.url.empty()) b.search = std::make_shared<HttpSearchBackend>(c.search.endpoint());
  b.fetch = std::make_shared<HttpFetchBackend>(c.fetch.url, c.fetch.api_key, std::chrono::milliseconds(c.fetch.timeout_ms));
  if (!c.policy.url.empty()) {
    b.assistant = std::make_shared<HttpAssistantBackend>(c.policy.endpoint(), c.policy.model);
  } else {
    b.assistant = std::make_shared<ExtractiveAssistantBackend>();
  }
  if (!c.embed.url.empty()) {
    b.embedder = std::make_shared<HttpEmbedBackend>(c.embed.endpoint(), c.embed_dim);
  } else {
    b.embedder = std::make_shared<HashProjectionEmbedder>(c.embed_dim);
  }
  if (!c.index_path.empty()) b.index = std::make_shared<const Index>(Index::load(c.index_path));
  b.sandbox.wall_clock = std::chrono::milliseconds(c.sandbox_timeout_ms);
  b.sandbox.memory_bytes = c.sandbox_memory_mb << 20;
  b.fixtures = std::move(store);
  b.fixture_mode = b.fixtures ? c.fixture_mode : FixtureMode::Off;
  return std::make_shared<ToolPlatform>(std::move(b), c.tool_default, c.tool_limits);
}

std::shared_ptr<JudgeBackend> make_judge(const AppConfig& c, std::shared_ptr<FixtureStore> store) {
  std::shared_ptr<JudgeBackend> live;
  if (c.judge_backend == "exact") {
    live = std::make_shared<ExactMatchJudgeBackend>();
  } else if (!c.judge.url.empty()) {
    live = std::make_shared<HttpJudgeBackend>(c.judge.endpoint(), c.judge.model);
  }
  if (store && c.fixture_mode != FixtureMode::Off) {
    return std::make_shared<FixtureJudgeBackend>(live, std::move(store), c.fixture_mode);
  }
  if (!live) throw Error(ErrorCode::ConfigError, "no judge configured: set JUDGE_URL or judge.backend=exact");
  return live;
}

std::shared_ptr<PolicyBackend> make_policy(const AppConfig& c, const std::optional<std::filesystem::path>& script) {
  if (script) return std::make_shared<ScriptedPolicy>(ScriptedPolicy::load(*script));
  if (c.policy.url.empty()) throw Error(ErrorCode::ConfigError, "no policy configured: set POLICY_URL or pass a script");
  return std::make_shared<HttpPolicyBackend>(c.policy.endpoint(), c.policy.model, c.policy_multimodal);
}

RolloutConfig make_rollout_config(const AppConfig& c) {
  RolloutConfig r;
  r.max_rounds = c.max_rounds;
  r.sampling = c.sampling;
  r.group_size = c.group_size;
  r.observation_budget = c.observation_budget;
  r.generate_parallelism = c.generate_parallelism;
  r.postprocess_workers = c.postprocess_workers;
  r.tool_parallelism = std::max<std::size_t>(1, c.tool_default.max_inflight * builtin_tool_specs().size());
  r.judge_inflight = c.judge_max_inflight;
  r.judge_retry = JudgeRetryPolicy{c.judge_max_attempts, std::chrono::milliseconds(c.judge_initial_backoff_ms)};
  r.weights = c.weights;
  r.std_floor = c.std_floor;
  r.record_timing = c.record_timing;
  return r;
}

}  // namespace tir
