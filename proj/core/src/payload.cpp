#include "tir/payload.hpp"

#include <cctype>
#include <charconv>
#include <string>

#include <fmt/format.h>

#include "tir/error.hpp"

namespace tir {

namespace {

class LiteralReader {
 public:
  explicit LiteralReader(std::string_view text) : text_(text) {}

  Json read_document() {
    Json value = read_value(0);
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return value;
  }

 private:
  static constexpr int kMaxDepth = 256;

  [[noreturn]] void fail(std::string_view what) const {
    throw Error(ErrorCode::PayloadUnparsable, fmt::format("{} at offset {}", what, pos_));
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Json read_value(int depth) {
    if (depth > kMaxDepth) fail("nesting too deep");
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '{') return read_dict(depth);
    if (c == '[') return read_sequence(depth, ']');
    if (c == '(') return read_sequence(depth, ')');
    if (c == '\'' || c == '"') return read_string();
    if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) return read_number();
    return read_keyword();
  }

  Json read_dict(int depth) {
    ++pos_;
    Json obj = Json::object();
    while (true) {
      if (consume('}')) return obj;
      skip_space();
      Json key = read_value(depth + 1);
      if (!key.is_string()) {
        // Python allows non-string keys; JSON does not. Normalize scalars to text.
        if (key.is_structured()) fail("unhashable dictionary key");
        key = key.dump();
      }
      if (!consume(':')) fail("expected ':'");
      obj[key.get<std::string>()] = read_value(depth + 1);
      if (consume(',')) continue;
      if (consume('}')) return obj;
      fail("expected ',' or '}'");
    }
  }

  Json read_sequence(int depth, char close) {
    ++pos_;
    Json arr = Json::array();
    while (true) {
      if (consume(close)) return arr;
      arr.push_back(read_value(depth + 1));
      if (consume(',')) continue;
      if (consume(close)) return arr;
      fail("expected ',' or closing bracket");
    }
  }

  void append_utf8(std::string& out, std::uint32_t cp) {
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

  std::uint32_t read_hex(std::size_t digits) {
    if (pos_ + digits > text_.size()) fail("truncated escape");
    std::uint32_t v = 0;
    const auto* first = text_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, first + digits, v, 16);
    if (ec != std::errc() || ptr != first + digits) fail("bad hex escape");
    pos_ += digits;
    return v;
  }

  Json read_string() {
    const char quote = text_[pos_];
    const bool triple = text_.substr(pos_, 3) == std::string(3, quote);
    pos_ += triple ? 3 : 1;
    std::string out;
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated string");
      const char c = text_[pos_];
      if (triple) {
        if (text_.substr(pos_, 3) == std::string(3, quote)) {
          pos_ += 3;
          return out;
        }
      } else if (c == quote) {
        ++pos_;
        return out;
      } else if (c == '\n') {
        fail("newline in string");
      }
      if (c != '\\') {
        out += c;
        ++pos_;
        continue;
      }
      if (++pos_ >= text_.size()) fail("unterminated escape");
      const char e = text_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '0': out += '\0'; break;
        case '\\': out += '\\'; break;
        case '\'': out += '\''; break;
        case '"': out += '"'; break;
        case '/': out += '/'; break;
        case '\n': break;
        case 'x': append_utf8(out, read_hex(2)); break;
        case 'u': {
          std::uint32_t cp = read_hex(4);
          if (cp >= 0xD800 && cp <= 0xDBFF && text_.substr(pos_, 2) == "\\u") {
            pos_ += 2;
            const std::uint32_t lo = read_hex(4);
            cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
          }
          append_utf8(out, cp);
          break;
        }
        case 'U': append_utf8(out, read_hex(8)); break;
        default:
          out += '\\';
          out += e;
      }
    }
  }

  Json read_number() {
    const std::size_t start = pos_;
    if (text_[pos_] == '+' || text_[pos_] == '-') ++pos_;
    bool is_float = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '_') {
        ++pos_;
      } else if (c == '.' || c == 'e' || c == 'E') {
        is_float = true;
        ++pos_;
        if ((c == 'e' || c == 'E') && pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      } else {
        break;
      }
    }
    std::string digits;
    for (char c : text_.substr(start, pos_ - start)) {
      if (c != '_' && c != '+') digits += c;
    }
    if (digits.empty() || digits == "-") fail("bad number");
    if (!is_float) {
      std::int64_t v = 0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec == std::errc() && ptr == digits.data() + digits.size()) return v;
    }
    double d = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) fail("bad number");
    return d;
  }

  Json read_keyword() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    const std::string_view word = text_.substr(start, pos_ - start);
    if (word == "True" || word == "true") return true;
    if (word == "False" || word == "false") return false;
    if (word == "None" || word == "null") return nullptr;
    pos_ = start;
    fail("unexpected token");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Json parse_python_literal(std::string_view text) { return LiteralReader(text).read_document(); }

Json parse_structured_literal(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
  }
  return parse_python_literal(text);
}

}  // namespace tir
