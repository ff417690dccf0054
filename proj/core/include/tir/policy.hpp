#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tir/http.hpp"
#include "tir/json_util.hpp"

namespace tir {

struct GenerateRequest {
  /// OpenAI-style chat messages.
  Json messages = Json::array();
  SamplingParams sampling;
  std::vector<std::string> stop;
  std::string item_id;
  std::size_t sample_index = 0;
  std::size_t turn_index = 0;
};

struct GenerateResult {
  std::string text;
  std::string end_reason;
};

/// Produces the next assistant turn. Throws Error(PolicyFailure).
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual GenerateResult generate(const GenerateRequest& request) = 0;
  /// Whether image observations may be attached as image content.
  [[nodiscard]] virtual bool multimodal() const { return false; }
};

/// Chat-completion endpoint. A turn cut at the tool-call stop string gets
/// its closing marker restored.
class HttpPolicyBackend final : public PolicyBackend {
 public:
  HttpPolicyBackend(HttpEndpoint endpoint, std::string model, bool multimodal)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), multimodal_(multimodal) {}
  GenerateResult generate(const GenerateRequest& request) override;
  [[nodiscard]] bool multimodal() const override { return multimodal_; }

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  bool multimodal_;
};

/// Replays pre-written turns. Script lines are
///   {"item_id": ..., "sample_index": n (optional), "turns": ["...", ...]}
/// A script without sample_index serves every sample of its item. Turns are
/// returned verbatim, without applying stop strings, so tests can produce
/// protocol violations a real decoder would stop short of.
class ScriptedPolicy final : public PolicyBackend {
 public:
  ScriptedPolicy() = default;
  /// Throws Error(ParseError).
  static ScriptedPolicy parse(std::string_view jsonl);
  static ScriptedPolicy load(const std::filesystem::path& path);

  void add(std::string item_id, std::optional<std::size_t> sample_index, std::vector<std::string> turns);
  GenerateResult generate(const GenerateRequest& request) override;

 private:
  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> exact_;
  std::map<std::string, std::vector<std::string>> any_sample_;
};

}  // namespace tir
