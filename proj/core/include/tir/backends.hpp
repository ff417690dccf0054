#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tir/http.hpp"
#include "tir/json_util.hpp"

namespace tir {

struct SearchResultItem {
  int id = 0;
  std::string title;
  std::string content;
  std::string url;
  std::optional<std::string> date;
};

Json to_json(const SearchResultItem& item);
SearchResultItem search_item_from_json(const Json& j);

/// Text search engine. Implementations throw Error(Timeout) or
/// Error(BackendFailure).
class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::vector<SearchResultItem> search(const std::string& query) = 0;
};

/// POSTs {"query": q, "top_k": 10} and accepts either a bare array or
/// {"results": [...]} / {"search_result": [...]} with title, content (or
/// snippet), url and optional date per entry.
class HttpSearchBackend final : public SearchBackend {
 public:
  explicit HttpSearchBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  std::vector<SearchResultItem> search(const std::string& query) override;

 private:
  HttpEndpoint endpoint_;
};

/// Fixed query -> results table.
class StaticSearchBackend final : public SearchBackend {
 public:
  explicit StaticSearchBackend(std::map<std::string, std::vector<SearchResultItem>> table)
      : table_(std::move(table)) {}
  std::vector<SearchResultItem> search(const std::string& query) override;

 private:
  std::map<std::string, std::vector<SearchResultItem>> table_;
};

/// Returns the readable text of a page. Throws Error(FetchFailure).
class FetchBackend {
 public:
  virtual ~FetchBackend() = default;
  virtual std::string fetch_text(const std::string& url) = 0;
};

/// Direct GET followed by HTML-to-text reduction, or, when `reader_prefix`
/// is set, GET of reader_prefix + url whose body is taken as text.
class HttpFetchBackend final : public FetchBackend {
 public:
  HttpFetchBackend(std::string reader_prefix, std::string api_key, std::chrono::milliseconds timeout);
  std::string fetch_text(const std::string& url) override;

 private:
  std::string reader_prefix_;
  std::string api_key_;
  std::chrono::milliseconds timeout_;
};

/// Fixed url -> HTML table; pages are reduced with html_to_text.
class StaticFetchBackend final : public FetchBackend {
 public:
  explicit StaticFetchBackend(std::map<std::string, std::string> pages) : pages_(std::move(pages)) {}
  std::string fetch_text(const std::string& url) override;

 private:
  std::map<std::string, std::string> pages_;
};

/// Goal-directed page summarizer returning {rational, evidence, summary}.
/// Throws Error(AssistantFailure).
class AssistantBackend {
 public:
  virtual ~AssistantBackend() = default;
  virtual Json summarize(const std::string& goal, const std::string& page_text) = 0;
};

class HttpAssistantBackend final : public AssistantBackend {
 public:
  HttpAssistantBackend(HttpEndpoint endpoint, std::string model)
      : endpoint_(std::move(endpoint)), model_(std::move(model)) {}
  Json summarize(const std::string& goal, const std::string& page_text) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
};

/// Deterministic extractive summarizer: evidence is the sentences sharing
/// the most terms with the goal.
class ExtractiveAssistantBackend final : public AssistantBackend {
 public:
  Json summarize(const std::string& goal, const std::string& page_text) override;
};

/// Validates and normalizes {rational, evidence: [str], summary}.
Json normalize_summary(const Json& j);

}  // namespace tir
