#include "tir/trajectory.hpp"

#include <array>

#include <fmt/format.h>

#include "tir/error.hpp"
#include "tir/payload.hpp"

namespace tir {

namespace {

constexpr std::array<SegmentKind, 4> kKinds = {SegmentKind::Think, SegmentKind::ToolCall,
                                              SegmentKind::ToolResponse, SegmentKind::Answer};

std::optional<SegmentKind> opener_at(std::string_view src, std::size_t pos) {
  for (SegmentKind k : kKinds) {
    if (src.substr(pos, open_tag(k).size()) == open_tag(k)) return k;
  }
  return std::nullopt;
}

std::optional<SegmentKind> closer_at(std::string_view src, std::size_t pos) {
  for (SegmentKind k : kKinds) {
    if (src.substr(pos, close_tag(k).size()) == close_tag(k)) return k;
  }
  return std::nullopt;
}

void add_outside(std::string_view src, std::size_t begin, std::size_t end, std::vector<ByteSpan>& out) {
  while (begin < end && is_free_whitespace(src[begin])) ++begin;
  while (end > begin && is_free_whitespace(src[end - 1])) --end;
  if (begin < end) out.push_back({begin, end});
}

std::size_t count_non_whitespace(std::string_view text) {
  std::size_t n = 0;
  for (char c : text) {
    if (utf8::is_continuation(static_cast<unsigned char>(c))) continue;
    if (!is_free_whitespace(c)) ++n;
  }
  return n;
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Think: return "think";
    case SegmentKind::ToolCall: return "tool_call";
    case SegmentKind::ToolResponse: return "tool_response";
    case SegmentKind::Answer: return "answer";
  }
  return "?";
}

std::string_view open_tag(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Think: return "<think>";
    case SegmentKind::ToolCall: return "<tool_call>";
    case SegmentKind::ToolResponse: return "<tool_response>";
    case SegmentKind::Answer: return "<answer>";
  }
  return "";
}

std::string_view close_tag(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Think: return "</think>";
    case SegmentKind::ToolCall: return "</tool_call>";
    case SegmentKind::ToolResponse: return "</tool_response>";
    case SegmentKind::Answer: return "</answer>";
  }
  return "";
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnbalancedTag: return "UnbalancedTag";
    case ViolationKind::IllegalSequence: return "IllegalSequence";
    case ViolationKind::UnparsablePayload: return "UnparsablePayload";
  }
  return "?";
}

bool is_free_whitespace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string ToolInvocation::canonical_arguments() const { return canonical_dump(arguments); }

Json ToolInvocation::to_json() const { return Json{{"name", name}, {"arguments", arguments}}; }

ParsedTrajectory parse_trajectory(std::string_view source) {
  ParsedTrajectory out;
  out.source = std::string(source);
  const std::string_view src = out.source;

  std::size_t outside_begin = 0;
  std::size_t pos = 0;
  while (true) {
    const std::size_t lt = src.find('<', pos);
    if (lt == std::string_view::npos) break;
    if (const auto kind = opener_at(src, lt)) {
      const std::size_t content_begin = lt + open_tag(*kind).size();
      const std::size_t close = src.find(close_tag(*kind), content_begin);
      if (close == std::string_view::npos) {
        out.tag_issues.push_back({TagIssueKind::UnclosedOpen, *kind, lt});
        break;
      }
      add_outside(src, outside_begin, lt, out.residue_spans);
      const std::size_t region_end = close + close_tag(*kind).size();
      out.segments.push_back(Segment{*kind, std::string(src.substr(content_begin, close - content_begin)),
                                     {content_begin, close}, {lt, region_end}});
      pos = outside_begin = region_end;
      continue;
    }
    if (const auto kind = closer_at(src, lt)) {
      out.tag_issues.push_back({TagIssueKind::StrayClose, *kind, lt});
    }
    pos = lt + 1;
  }
  add_outside(src, outside_begin, src.size(), out.residue_spans);
  return out;
}

std::size_t residue_length(const ParsedTrajectory& t) {
  std::size_t n = 0;
  const std::string_view src = t.source;
  for (const ByteSpan& s : t.residue_spans) n += count_non_whitespace(src.substr(s.begin, s.size()));
  return n;
}

FormatReport validate_schema(const ParsedTrajectory& t) {
  FormatReport r;
  r.residue_len = residue_length(t);

  for (const TagIssue& issue : t.tag_issues) {
    const std::string what = issue.kind == TagIssueKind::UnclosedOpen
                                 ? fmt::format("unclosed {}", open_tag(issue.tag))
                                 : fmt::format("stray {}", close_tag(issue.tag));
    r.errors.push_back({ViolationKind::UnbalancedTag, issue.offset, what});
  }

  enum class State { ExpectThink, AfterThink, AfterCall, Done };
  State state = State::ExpectThink;
  bool sequence_broken = false;
  const Segment* answer = nullptr;
  for (const Segment& s : t.segments) {
    if (s.kind == SegmentKind::ToolCall) ++r.n_call;
    if (s.kind == SegmentKind::ToolResponse) ++r.n_resp;
    if (s.kind == SegmentKind::Answer) {
      r.has_answer = true;
      if (answer == nullptr) answer = &s;
    }
    if (s.kind == SegmentKind::ToolCall) {
      try {
        extract_tool_invocation(s);
      } catch (const Error& e) {
        r.errors.push_back({ViolationKind::UnparsablePayload, s.region.begin, e.what()});
      }
    }
    if (sequence_broken) continue;
    State next = state;
    bool ok = false;
    switch (state) {
      case State::ExpectThink:
        ok = s.kind == SegmentKind::Think;
        next = State::AfterThink;
        break;
      case State::AfterThink:
        ok = s.kind == SegmentKind::ToolCall || s.kind == SegmentKind::Answer;
        next = s.kind == SegmentKind::ToolCall ? State::AfterCall : State::Done;
        break;
      case State::AfterCall:
        ok = s.kind == SegmentKind::ToolResponse;
        next = State::ExpectThink;
        break;
      case State::Done:
        ok = false;
        break;
    }
    if (!ok) {
      sequence_broken = true;
      r.errors.push_back({ViolationKind::IllegalSequence, s.region.begin,
                          fmt::format("unexpected {} segment", open_tag(s.kind))});
    } else {
      state = next;
    }
  }
  if (!sequence_broken && state != State::Done) {
    r.errors.push_back({ViolationKind::IllegalSequence, t.source.size(), "trajectory does not end with an answer"});
  }
  if (answer != nullptr) {
    for (const ByteSpan& span : t.residue_spans) {
      if (span.begin >= answer->region.end) {
        r.errors.push_back({ViolationKind::IllegalSequence, span.begin, "content after answer"});
        break;
      }
    }
  }
  r.schema_valid = r.errors.empty();
  return r;
}

ToolInvocation parse_tool_invocation(std::string_view payload) {
  const Json doc = parse_structured_literal(payload);
  if (!doc.is_object()) throw Error(ErrorCode::PayloadUnparsable, "tool call payload is not an object");
  const auto name = doc.find("name");
  if (name == doc.end() || !name->is_string() || name->get<std::string>().empty()) {
    throw Error(ErrorCode::MissingField, "tool call has no name");
  }
  const auto args = doc.find("arguments");
  if (args == doc.end()) throw Error(ErrorCode::MissingField, "tool call has no arguments");
  ToolInvocation inv;
  inv.name = name->get<std::string>();
  if (args->is_object()) {
    inv.arguments = *args;
  } else if (args->is_string()) {
    // Some chat templates double-encode the arguments object.
    const Json inner = parse_structured_literal(args->get<std::string>());
    if (!inner.is_object()) throw Error(ErrorCode::PayloadUnparsable, "arguments is not an object");
    inv.arguments = inner;
  } else {
    throw Error(ErrorCode::PayloadUnparsable, "arguments is not an object");
  }
  return inv;
}

ToolInvocation extract_tool_invocation(const Segment& s) {
  if (s.kind != SegmentKind::ToolCall) {
    throw Error(ErrorCode::PayloadUnparsable, "segment is not a tool call");
  }
  return parse_tool_invocation(s.content);
}

std::string render_trajectory(const ParsedTrajectory& t) {
  // Segments are re-emitted from their parts; only the gaps between tag
  // regions (whitespace and residue) are copied from the source.
  std::string out;
  out.reserve(t.source.size());
  std::size_t pos = 0;
  for (const Segment& s : t.segments) {
    out.append(t.source, pos, s.region.begin - pos);
    out.append(open_tag(s.kind));
    out.append(s.content);
    out.append(close_tag(s.kind));
    pos = s.region.end;
  }
  out.append(t.source, pos, std::string::npos);
  return out;
}

std::optional<std::string> final_answer(const ParsedTrajectory& t) {
  for (auto it = t.segments.rbegin(); it != t.segments.rend(); ++it) {
    if (it->kind == SegmentKind::Answer) return it->content;
  }
  return std::nullopt;
}

Json segments_to_json(const ParsedTrajectory& t) {
  Json segs = Json::array();
  for (const Segment& s : t.segments) {
    segs.push_back({{"kind", to_string(s.kind)}, {"start", s.span.begin}, {"end", s.span.end}});
  }
  return segs;
}

Json to_json(const ParsedTrajectory& t) {
  Json residue = Json::array();
  for (const ByteSpan& s : t.residue_spans) residue.push_back({{"start", s.begin}, {"end", s.end}});
  return Json{{"source", t.source}, {"segments", segments_to_json(t)}, {"residue", residue}};
}

Json to_json(const FormatReport& r) {
  Json errors = Json::array();
  for (const Violation& v : r.errors) {
    errors.push_back({{"kind", to_string(v.kind)}, {"offset", v.offset}, {"message", v.message}});
  }
  return Json{{"schema_valid", r.schema_valid}, {"residue_len", r.residue_len}, {"n_call", r.n_call},
              {"n_resp", r.n_resp},           {"has_answer", r.has_answer},   {"errors", errors}};
}

}  // namespace tir
