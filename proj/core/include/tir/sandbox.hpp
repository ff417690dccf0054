#pragma once

#include <chrono>
#include <cstddef>
#include <string>

#include "tir/json_util.hpp"

namespace tir {

struct SandboxLimits {
  std::chrono::milliseconds wall_clock{10000};
  std::size_t memory_bytes = 256u << 20;
  /// Interpreter to run; resolved against PATH when not absolute.
  std::string python = "python3";
  /// Per-stream capture cap; excess output is discarded.
  std::size_t output_cap = 64u << 10;
  /// Try to enter a fresh network namespace; the in-interpreter audit shim
  /// applies either way.
  bool isolate_network = true;
};

struct SandboxOutput {
  std::string stdout_text;
  std::string stderr_text;
  /// Final value of a variable named `result`, JSON-encoded when possible and
  /// as its repr string otherwise; null when undefined.
  Json result;
  int exit_code = 0;

  [[nodiscard]] Json to_json() const;
};

/// Runs a Python script in a child process with an empty environment, an
/// empty scratch working directory, address-space/CPU/file-size rlimits and
/// an audit hook that denies network, filesystem, process and FFI access.
/// Throws Error(SandboxTimeout) when the wall clock elapses,
/// Error(SandboxViolation) on a denied operation or exhausted memory, and
/// Error(LaunchFailure) when the interpreter cannot be started. Uncaught
/// Python exceptions are ordinary output (traceback on stderr).
SandboxOutput run_python_sandboxed(const std::string& code, const SandboxLimits& limits = {});

}  // namespace tir
