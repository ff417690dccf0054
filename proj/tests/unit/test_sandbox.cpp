#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

#include "expect_error.hpp"
#include "mini_bench.hpp"
#include "sandbox_escapes.hpp"
#include "tir/sandbox.hpp"

using namespace tir;

namespace {

SandboxLimits fast_limits() {
  SandboxLimits l;
  l.wall_clock = std::chrono::milliseconds(3000);
  return l;
}

}  // namespace

TEST(Sandbox, ExampleScript) {
  const auto out = run_python_sandboxed("a = 5\nb = 10\nresult = a * b\nprint(result)");
  EXPECT_EQ(out.stdout_text, "50\n");
  EXPECT_EQ(out.result, Json(50));
  EXPECT_EQ(out.to_json(), (Json{{"stdout", "50\n"}, {"stderr", ""}, {"result", 50}}));
}

TEST(Sandbox, PrintOnly) {
  const auto out = run_python_sandboxed("print(6*7)");
  EXPECT_EQ(out.stdout_text, "42\n");
  EXPECT_TRUE(out.result.is_null());
}

TEST(Sandbox, StdlibImportsWork) {
  const auto out = run_python_sandboxed("import math, json\nresult = json.dumps({'r': math.floor(2.7)})");
  EXPECT_EQ(out.result, Json("{\"r\": 2}"));
}

TEST(Sandbox, UncaughtExceptionIsReported) {
  const auto out = run_python_sandboxed("raise ValueError('bad input')");
  EXPECT_NE(out.stderr_text.find("ValueError"), std::string::npos);
  EXPECT_TRUE(out.result.is_null());
}

TEST(Sandbox, EnvironmentIsEmpty) {
  const auto out = run_python_sandboxed("import os\nresult = sorted(k for k in os.environ if k != 'LC_CTYPE')");
  EXPECT_EQ(out.result, Json::array());
}

TEST(Sandbox, OutputIsCapped) {
  SandboxLimits l = fast_limits();
  l.output_cap = 1000;
  const auto out = run_python_sandboxed("print('x' * 100000)", l);
  EXPECT_LE(out.stdout_text.size(), 1100u);
}

TEST(Sandbox, EscapeSuite) {
  tir::testing::TempDir dir;
  const auto marker = dir.path() / "escaped.txt";
  for (const auto& attempt : tir::testing::sandbox_escape_attempts(marker.string())) {
    const auto start = std::chrono::steady_clock::now();
    EXPECT_TIR_ERROR(run_python_sandboxed(attempt.code, fast_limits()), attempt.expected);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    EXPECT_LT(elapsed, std::chrono::milliseconds(6000)) << attempt.name;
  }
  EXPECT_FALSE(std::filesystem::exists(marker));
}

TEST(Sandbox, SubprocessDenied) {
  EXPECT_TIR_ERROR(run_python_sandboxed("import os\nos.system('touch /tmp/x')", fast_limits()),
                   ErrorCode::SandboxViolation);
  EXPECT_TIR_ERROR(run_python_sandboxed("import subprocess\nsubprocess.run(['ls'])", fast_limits()),
                   ErrorCode::SandboxViolation);
}

TEST(Sandbox, MissingInterpreter) {
  SandboxLimits l = fast_limits();
  l.python = "/nonexistent/python";
  EXPECT_TIR_ERROR(run_python_sandboxed("print(1)", l), ErrorCode::LaunchFailure);
}
