#pragma once

#include <string_view>

#include "tir/json_util.hpp"

namespace tir {

/// Parses a structured value written either as strict JSON or as a Python
/// dictionary literal (single-quoted or triple-quoted strings, True/False/None,
/// tuples, trailing commas). Throws Error(PayloadUnparsable).
Json parse_structured_literal(std::string_view text);

/// Reads only the Python-literal dialect. Exposed for tests.
Json parse_python_literal(std::string_view text);

}  // namespace tir
