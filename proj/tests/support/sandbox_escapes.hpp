#pragma once

#include <string>
#include <vector>

#include "tir/error.hpp"

namespace tir::testing {

struct EscapeAttempt {
  std::string name;
  std::string code;
  ErrorCode expected;
};

/// `marker` is a host path the write attempt targets; it must not exist
/// afterwards.
inline std::vector<EscapeAttempt> sandbox_escape_attempts(const std::string& marker) {
  return {
      {"file_read", "print(open('/etc/passwd').read())", ErrorCode::SandboxViolation},
      {"file_write", "with open('" + marker + "', 'w') as f:\n    f.write('escaped')", ErrorCode::SandboxViolation},
      {"socket", "import socket\ns = socket.socket()\ns.connect(('127.0.0.1', 9))", ErrorCode::SandboxViolation},
      {"memory_bomb", "blocks = []\nwhile True:\n    blocks.append(bytearray(64 * 1024 * 1024))",
       ErrorCode::SandboxViolation},
      {"infinite_loop", "while True:\n    pass", ErrorCode::SandboxTimeout},
  };
}

}  // namespace tir::testing
