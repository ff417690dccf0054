#include "tir/html_text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>

namespace tir {

namespace {

bool iequals_prefix(std::string_view text, std::size_t pos, std::string_view word) {
  if (pos + word.size() > text.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view text, std::string_view word, std::size_t from) {
  for (std::size_t i = from; i + word.size() <= text.size(); ++i) {
    if (iequals_prefix(text, i, word)) return i;
  }
  return std::string_view::npos;
}

void append_code_point(std::string& out, std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF) return;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Returns the number of bytes consumed, 0 when `text[pos]` does not start a
// recognized entity.
std::size_t decode_entity(std::string_view text, std::size_t pos, std::string& out) {
  const std::size_t semi = text.find(';', pos);
  if (semi == std::string_view::npos || semi - pos > 10) return 0;
  const std::string_view name = text.substr(pos + 1, semi - pos - 1);
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 7> kNamed = {{
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "}, {"#39", "'"},
  }};
  for (const auto& [n, v] : kNamed) {
    if (name == n) {
      out += v;
      return semi - pos + 1;
    }
  }
  if (name.size() >= 2 && name[0] == '#') {
    std::uint32_t cp = 0;
    const bool hex = name[1] == 'x' || name[1] == 'X';
    const std::string_view digits = name.substr(hex ? 2 : 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      append_code_point(out, cp);
      return semi - pos + 1;
    }
  }
  return 0;
}

}  // namespace

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

std::string html_to_text(std::string_view html) {
  static constexpr std::array<std::string_view, 5> kDropped = {"script", "style", "noscript", "template", "head"};
  std::string raw;
  raw.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '<') {
      if (html.substr(i, 4) == "<!--") {
        const std::size_t end = html.find("-->", i + 4);
        i = end == std::string_view::npos ? html.size() : end + 3;
        continue;
      }
      bool dropped = false;
      for (std::string_view tag : kDropped) {
        if (iequals_prefix(html, i + 1, tag)) {
          const char after = i + 1 + tag.size() < html.size() ? html[i + 1 + tag.size()] : '>';
          if (after == '>' || std::isspace(static_cast<unsigned char>(after)) || after == '/') {
            const std::string close = "</" + std::string(tag);
            const std::size_t end = ifind(html, close, i + 1);
            if (end == std::string_view::npos) {
              i = html.size();
            } else {
              const std::size_t gt = html.find('>', end);
              i = gt == std::string_view::npos ? html.size() : gt + 1;
            }
            dropped = true;
            break;
          }
        }
      }
      if (dropped) {
        raw += ' ';
        continue;
      }
      const std::size_t gt = html.find('>', i);
      if (gt == std::string_view::npos) {
        raw.append(html.substr(i));
        break;
      }
      raw += ' ';
      i = gt + 1;
      continue;
    }
    if (c == '&') {
      if (const std::size_t used = decode_entity(html, i, raw); used > 0) {
        i += used;
        continue;
      }
    }
    raw += c;
    ++i;
  }
  return collapse_whitespace(raw);
}

}  // namespace tir
