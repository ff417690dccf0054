#include "tir/judge.hpp"

#include <cctype>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tir/error.hpp"
#include "tir/payload.hpp"
#include "tir/prompts.hpp"

namespace tir {

namespace prompts {

std::string render_judge_prompt(std::string_view question, std::string_view output, std::string_view ground_truth) {
  std::string text(judge_prompt_template());
  const auto replace = [&text](std::string_view key, std::string_view value) {
    const std::size_t at = text.find(key);
    if (at != std::string::npos) text.replace(at, key.size(), value);
  };
  // Substituted values are inserted once, so placeholders inside them stay literal.
  replace("{question}", question);
  replace("{output}", output);
  replace("{ground_truth}", ground_truth);
  return text;
}

}  // namespace prompts

Json to_json(const JudgeVerdict& v) {
  return Json{{"extracted_final_answer", v.extracted_final_answer},
              {"reasoning", v.reasoning},
              {"result", v.result},
              {"confidence", v.confidence},
              {"strict", v.strict}};
}

std::optional<JudgeVerdict> parse_verdict(std::string_view text) {
  const std::size_t open = text.find('{');
  const std::size_t close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  Json doc;
  try {
    doc = parse_structured_literal(text.substr(open, close - open + 1));
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!doc.is_object()) return std::nullopt;

  JudgeVerdict v;
  const auto result = doc.find("result");
  if (result == doc.end()) return std::nullopt;
  if (result->is_string()) {
    v.result = result->get<std::string>();
  } else if (result->is_number_integer()) {
    v.result = std::to_string(result->get<std::int64_t>());
  }
  if (v.result != "1" && v.result != "0") return std::nullopt;

  const auto confidence = doc.find("confidence");
  if (confidence == doc.end()) return std::nullopt;
  if (confidence->is_number_integer()) {
    v.confidence = static_cast<int>(confidence->get<std::int64_t>());
  } else if (confidence->is_number_float() && confidence->get<double>() == static_cast<int>(confidence->get<double>())) {
    v.confidence = static_cast<int>(confidence->get<double>());
  } else {
    return std::nullopt;
  }
  if (v.confidence < 0 || v.confidence > 100) return std::nullopt;

  if (const auto strict = doc.find("strict"); strict != doc.end() && !(strict->is_boolean() && strict->get<bool>())) {
    return std::nullopt;
  }
  if (const auto a = doc.find("extracted_final_answer"); a != doc.end() && a->is_string()) {
    v.extracted_final_answer = a->get<std::string>();
  }
  if (const auto r = doc.find("reasoning"); r != doc.end() && r->is_string()) v.reasoning = r->get<std::string>();
  return v;
}

Json JudgeRequest::messages() const {
  return Json::array({{{"role", "user"}, {"content", prompts::render_judge_prompt(question, model_answer, ground_truth)}}});
}

Json JudgeRequest::fixture_key() const {
  return Json{{"question", question}, {"output", model_answer}, {"ground_truth", ground_truth},
              {"prompt_version", prompts::kPromptVersion}};
}

HttpJudgeBackend::HttpJudgeBackend(HttpEndpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::string HttpJudgeBackend::complete(const JudgeRequest& request) {
  SamplingParams sampling;
  sampling.temperature = 0.0;
  sampling.top_p = 1.0;
  sampling.max_tokens = 1024;
  try {
    return chat_complete(endpoint_, model_, request.messages(), sampling, {}).text;
  } catch (const Error& e) {
    throw Error(ErrorCode::JudgeUnreachable, e.what());
  }
}

namespace {

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (c < 0x80) {
      if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

}  // namespace

std::string ExactMatchJudgeBackend::complete(const JudgeRequest& request) {
  const std::string answer = normalize_answer(request.model_answer);
  const std::string truth = normalize_answer(request.ground_truth);
  const bool correct = !truth.empty() && answer.find(truth) != std::string::npos;
  return canonical_dump(Json{{"extracted_final_answer", request.model_answer},
                             {"reasoning", correct ? "normalized answer contains the ground truth"
                                                   : "normalized answer does not contain the ground truth"},
                             {"result", correct ? "1" : "0"},
                             {"confidence", 100},
                             {"strict", true}});
}

FixtureJudgeBackend::FixtureJudgeBackend(std::shared_ptr<JudgeBackend> live, std::shared_ptr<FixtureStore> store,
                                         FixtureMode mode)
    : live_(std::move(live)), store_(std::move(store)), mode_(mode) {}

std::string FixtureJudgeBackend::complete(const JudgeRequest& request) {
  const Json response = store_->resolve(mode_, "judge", request.fixture_key(), [&] {
    if (!live_) throw Error(ErrorCode::JudgeUnreachable, "no live judge configured");
    return Json{{"text", live_->complete(request)}};
  });
  if (response.is_null()) return {};
  return response.value("text", "");
}

JudgeOutcome judge_answer(const JudgeRequest& request, JudgeBackend& backend, const JudgeRetryPolicy& retry) {
  auto backoff = retry.initial_backoff;
  bool last_was_transport = false;
  std::string last_error;
  const int attempts = std::max(retry.max_attempts, 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    std::string text;
    try {
      text = backend.complete(request);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::FixtureMiss) throw;
      last_was_transport = true;
      last_error = e.what();
      spdlog::debug("judge attempt {} failed: {}", attempt, last_error);
      continue;
    }
    if (auto verdict = parse_verdict(text)) return JudgeOutcome{*verdict, attempt};
    last_was_transport = false;
    last_error = "judge output did not match the verdict schema";
  }
  throw Error(last_was_transport ? ErrorCode::JudgeUnreachable : ErrorCode::VerdictUnparsable,
              fmt::format("after {} attempts: {}", attempts, last_error));
}

AsyncJudge::AsyncJudge(std::shared_ptr<JudgeBackend> backend, ThreadPool& pool, std::size_t max_inflight,
                       JudgeRetryPolicy retry)
    : backend_(std::move(backend)), pool_(pool), limiter_(max_inflight), retry_(retry) {}

std::future<JudgeOutcome> AsyncJudge::submit(JudgeRequest request) {
  return pool_.submit([this, request = std::move(request)] {
    InflightLimiter::Permit permit(limiter_);
    return judge_answer(request, *backend_, retry_);
  });
}

}  // namespace tir
