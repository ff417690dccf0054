#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tir {

/// Typed failure reasons surfaced by the runtime. Each module documents which
/// codes its operations may raise.
enum class ErrorCode {
  // trajectory payloads
  PayloadUnparsable,
  MissingField,
  // judge
  JudgeUnreachable,
  VerdictUnparsable,
  // numerical kernel
  ShapeMismatch,
  // tool platform
  ToolNotFound,
  ArgValidation,
  BackendFailure,
  Timeout,
  InvalidBBox,
  ImageDecode,
  EmptyIndexForCategory,
  FetchFailure,
  WindowOutOfRange,
  AssistantFailure,
  SandboxTimeout,
  SandboxViolation,
  LaunchFailure,
  FixtureMiss,
  StoreCorrupt,
  // retrieval index
  DuplicateId,
  DimensionMismatch,
  EmptyManifest,
  // rollout / eval
  PolicyFailure,
  ParseError,
  EmptyInput,
  IdMismatch,
  // plumbing
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tir
