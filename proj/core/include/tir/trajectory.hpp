#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tir/json_util.hpp"

namespace tir {

enum class SegmentKind { Think, ToolCall, ToolResponse, Answer };

std::string_view to_string(SegmentKind kind);
std::string_view open_tag(SegmentKind kind);
std::string_view close_tag(SegmentKind kind);

/// Half-open byte range [begin, end) into a source string.
struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const { return end - begin; }
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct Segment {
  SegmentKind kind;
  std::string content;
  ByteSpan span;    // content only, tag markers excluded
  ByteSpan region;  // opening marker through closing marker
};

enum class TagIssueKind { UnclosedOpen, StrayClose };

struct TagIssue {
  TagIssueKind kind;
  SegmentKind tag;
  std::size_t offset;
};

struct ParsedTrajectory {
  std::vector<Segment> segments;
  std::vector<ByteSpan> residue_spans;
  std::vector<TagIssue> tag_issues;
  std::string source;
};

enum class ViolationKind { UnbalancedTag, IllegalSequence, UnparsablePayload };

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t offset;
  std::string message;
};

struct FormatReport {
  bool schema_valid = false;
  std::size_t residue_len = 0;
  std::vector<Violation> errors;
  std::size_t n_call = 0;
  std::size_t n_resp = 0;
  bool has_answer = false;
};

struct ToolInvocation {
  std::string name;
  Json arguments = Json::object();

  /// Sorted-key compact JSON of the arguments; the fixture key.
  [[nodiscard]] std::string canonical_arguments() const;
  [[nodiscard]] Json to_json() const;
};

/// Whitespace that is free outside tags: space, tab, CR, LF, FF, VT.
bool is_free_whitespace(char c);

/// Total: never throws. Recognizes the four tag pairs; inner tags of another
/// kind are literal content. An opener without a matching closer turns the
/// rest of the text into residue and is recorded as a tag issue.
ParsedTrajectory parse_trajectory(std::string_view source);

/// Checks the grammar (Think ToolCall ToolResponse)* Think Answer, counts
/// calls/responses and residue code points.
FormatReport validate_schema(const ParsedTrajectory& t);

/// Throws Error(PayloadUnparsable) or Error(MissingField).
ToolInvocation extract_tool_invocation(const Segment& s);
ToolInvocation parse_tool_invocation(std::string_view payload);

std::string render_trajectory(const ParsedTrajectory& t);

/// Number of non-whitespace code points in the residue spans.
std::size_t residue_length(const ParsedTrajectory& t);

/// Content of the last Answer segment, if any.
std::optional<std::string> final_answer(const ParsedTrajectory& t);

/// {source, segments:[{kind,start,end}], residue:[{start,end}]}
Json to_json(const ParsedTrajectory& t);
Json segments_to_json(const ParsedTrajectory& t);
Json to_json(const FormatReport& r);

}  // namespace tir
