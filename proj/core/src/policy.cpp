#include "tir/policy.hpp"

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir {

GenerateResult HttpPolicyBackend::generate(const GenerateRequest& request) {
  ChatResult r;
  try {
    r = chat_complete(endpoint_, model_, request.messages, request.sampling, request.stop);
  } catch (const Error& e) {
    throw Error(ErrorCode::PolicyFailure, e.what());
  }
  std::string text = std::move(r.text);
  const std::size_t open = text.rfind("<tool_call>");
  if (open != std::string::npos && text.find("</tool_call>", open) == std::string::npos && r.finish_reason == "stop") {
    text += "</tool_call>";
  }
  return GenerateResult{std::move(text), r.finish_reason};
}

ScriptedPolicy ScriptedPolicy::parse(std::string_view jsonl) {
  ScriptedPolicy p;
  for_each_jsonl(jsonl, [&](std::size_t line, const Json& j) {
    if (!j.is_object() || !j.contains("item_id") || !j.contains("turns") || !j.at("turns").is_array()) {
      throw Error(ErrorCode::ParseError, fmt::format("script line {}: need item_id and a turns array", line));
    }
    std::vector<std::string> turns;
    for (const auto& t : j.at("turns")) {
      if (!t.is_string()) throw Error(ErrorCode::ParseError, fmt::format("script line {}: turns must be strings", line));
      turns.push_back(t.get<std::string>());
    }
    std::optional<std::size_t> sample;
    if (j.contains("sample_index") && !j.at("sample_index").is_null()) {
      if (!j.at("sample_index").is_number_unsigned()) {
        throw Error(ErrorCode::ParseError, fmt::format("script line {}: sample_index must be a non-negative integer", line));
      }
      sample = j.at("sample_index").get<std::size_t>();
    }
    const Json& id = j.at("item_id");
    p.add(id.is_string() ? id.get<std::string>() : id.dump(), sample, std::move(turns));
  });
  return p;
}

ScriptedPolicy ScriptedPolicy::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void ScriptedPolicy::add(std::string item_id, std::optional<std::size_t> sample_index, std::vector<std::string> turns) {
  if (sample_index) {
    exact_[{std::move(item_id), *sample_index}] = std::move(turns);
  } else {
    any_sample_[std::move(item_id)] = std::move(turns);
  }
}

GenerateResult ScriptedPolicy::generate(const GenerateRequest& request) {
  const std::vector<std::string>* turns = nullptr;
  if (const auto it = exact_.find({request.item_id, request.sample_index}); it != exact_.end()) {
    turns = &it->second;
  } else if (const auto any = any_sample_.find(request.item_id); any != any_sample_.end()) {
    turns = &any->second;
  }
  if (turns == nullptr) {
    throw Error(ErrorCode::PolicyFailure,
                fmt::format("no script for item {} sample {}", request.item_id, request.sample_index));
  }
  if (request.turn_index >= turns->size()) {
    throw Error(ErrorCode::PolicyFailure, fmt::format("script for item {} has only {} turns", request.item_id,
                                                      turns->size()));
  }
  return GenerateResult{(*turns)[request.turn_index], "stop"};
}

}  // namespace tir
