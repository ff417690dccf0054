#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tir/error.hpp"
#include "tir/fixture_store.hpp"
#include "tir/judge.hpp"
#include "tir/policy.hpp"
#include "tir/reward.hpp"
#include "tir/rollout.hpp"
#include "tir/tool_platform.hpp"

namespace tir {

struct EndpointConfig {
  std::string url;
  std::string model;
  /// Only ever taken from the environment.
  std::string api_key;
  int timeout_ms = 30000;

  [[nodiscard]] HttpEndpoint endpoint() const;
};

struct AppConfig {
  EndpointConfig policy;
  bool policy_multimodal = false;
  EndpointConfig judge;
  /// "http" or "exact" (hermetic containment match).
  std::string judge_backend = "http";
  int judge_max_attempts = 3;
  int judge_initial_backoff_ms = 1000;
  std::size_t judge_max_inflight = 8;
  EndpointConfig search;
  /// Reader-service prefix; empty fetches pages directly.
  EndpointConfig fetch;
  EndpointConfig embed;
  std::size_t embed_dim = 64;

  SamplingParams sampling;
  RewardWeights weights;
  double clip_eps = 0.2;
  double std_floor = 1e-6;

  std::size_t max_rounds = 10;
  std::size_t group_size = 1;
  std::size_t observation_budget = 8192;
  std::size_t generate_parallelism = 8;
  std::size_t postprocess_workers = 2;
  bool record_timing = true;

  RateLimit tool_default;
  std::map<std::string, RateLimit> tool_limits;
  int sandbox_timeout_ms = 10000;
  std::size_t sandbox_memory_mb = 256;
  std::string index_path;

  std::string fixture_dir;
  FixtureMode fixture_mode = FixtureMode::Off;
};

/// Every recognized key with its default value; the schema for validation.
Json default_config_json();

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
EnvLookup process_env();

/// Layers defaults, the JSON file, environment variables and `key.path=value`
/// overrides, in that order of increasing precedence. Unknown keys anywhere
/// throw Error(ConfigError) naming the key.
AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

/// Strict conversion of a complete document.
AppConfig config_from_json(const Json& j);
/// Effective settings without credentials.
Json to_json(const AppConfig& c);
std::string config_hash(const AppConfig& c);

/// 0 ok, 1 internal, 2 input, 3 backend.
int exit_code_for(ErrorCode code);

std::shared_ptr<FixtureStore> make_fixture_store(const AppConfig& c);
std::shared_ptr<ToolPlatform> make_tool_platform(const AppConfig& c, std::shared_ptr<FixtureStore> store);
std::shared_ptr<JudgeBackend> make_judge(const AppConfig& c, std::shared_ptr<FixtureStore> store);
/// Scripted when `script` is given, otherwise the HTTP policy endpoint.
std::shared_ptr<PolicyBackend> make_policy(const AppConfig& c, const std::optional<std::filesystem::path>& script);
RolloutConfig make_rollout_config(const AppConfig& c);

}  // namespace tir
