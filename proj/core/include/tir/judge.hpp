#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <string>

#include "tir/concurrency.hpp"
#include "tir/fixture_store.hpp"
#include "tir/http.hpp"
#include "tir/json_util.hpp"

namespace tir {

struct JudgeVerdict {
  std::string extracted_final_answer;
  std::string reasoning;
  std::string result;  // "1" or "0"
  int confidence = 0;
  bool strict = true;
};

Json to_json(const JudgeVerdict& v);

/// Extracts the first JSON object from raw judge output (tolerating code
/// fences and single-quoted dictionaries) and validates it against the
/// verdict schema. Returns nullopt when the text does not match.
std::optional<JudgeVerdict> parse_verdict(std::string_view text);

struct JudgeRequest {
  std::string question;
  std::string model_answer;
  std::string ground_truth;

  /// Chat messages carrying the rendered judge prompt.
  [[nodiscard]] Json messages() const;
  [[nodiscard]] Json fixture_key() const;
};

/// A judge endpoint returns raw text for a request. Transport failures throw
/// Error(JudgeUnreachable), Error(Timeout) or Error(BackendFailure).
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string complete(const JudgeRequest& request) = 0;
};

/// Chat-completion judge at a configured URL; always temperature 0.
class HttpJudgeBackend final : public JudgeBackend {
 public:
  HttpJudgeBackend(HttpEndpoint endpoint, std::string model);
  std::string complete(const JudgeRequest& request) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
};

/// Hermetic judge: "1" when the normalized answer equals or contains the
/// normalized ground truth (case, whitespace and punctuation folded).
class ExactMatchJudgeBackend final : public JudgeBackend {
 public:
  std::string complete(const JudgeRequest& request) override;
};

/// Record/replay wrapper keyed by (question, output, ground_truth).
class FixtureJudgeBackend final : public JudgeBackend {
 public:
  FixtureJudgeBackend(std::shared_ptr<JudgeBackend> live, std::shared_ptr<FixtureStore> store, FixtureMode mode);
  std::string complete(const JudgeRequest& request) override;

 private:
  std::shared_ptr<JudgeBackend> live_;
  std::shared_ptr<FixtureStore> store_;
  FixtureMode mode_;
};

struct JudgeRetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

struct JudgeOutcome {
  JudgeVerdict verdict;
  int attempts = 0;
};

/// Sends the judge prompt and parses the verdict, retrying unparsable output
/// and transport failures with exponential backoff. Throws
/// Error(JudgeUnreachable) when the last failure was transport,
/// Error(VerdictUnparsable) otherwise. Error(FixtureMiss) propagates.
JudgeOutcome judge_answer(const JudgeRequest& request, JudgeBackend& backend, const JudgeRetryPolicy& retry = {});

/// Per-trajectory asynchronous scoring with a bound on in-flight judge calls.
class AsyncJudge {
 public:
  AsyncJudge(std::shared_ptr<JudgeBackend> backend, ThreadPool& pool, std::size_t max_inflight,
             JudgeRetryPolicy retry = {});

  std::future<JudgeOutcome> submit(JudgeRequest request);

  [[nodiscard]] std::size_t peak_inflight() const { return limiter_.peak_inflight(); }

 private:
  std::shared_ptr<JudgeBackend> backend_;
  ThreadPool& pool_;
  InflightLimiter limiter_;
  JudgeRetryPolicy retry_;
};

}  // namespace tir
