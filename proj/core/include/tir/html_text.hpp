#pragma once

#include <string>
#include <string_view>

namespace tir {

/// Reduces an HTML page to readable text: drops script/style/noscript/
/// template/head bodies and comments, strips tags, decodes common entities
/// and collapses whitespace runs to single spaces.
std::string html_to_text(std::string_view html);

/// Collapses whitespace runs to single spaces and trims.
std::string collapse_whitespace(std::string_view text);

}  // namespace tir
