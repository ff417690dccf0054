#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "tir/config.hpp"

namespace tirctl {

/// Runs one command line. Returns the process exit code: 0 ok, 1 internal,
/// 2 input, 3 backend.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const tir::EnvLookup& env = tir::process_env());

}  // namespace tirctl
