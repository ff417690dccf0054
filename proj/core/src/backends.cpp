#include "tir/backends.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "tir/error.hpp"
#include "tir/html_text.hpp"
#include "tir/payload.hpp"

namespace tir {

Json to_json(const SearchResultItem& item) {
  Json j{{"id", item.id}, {"title", item.title}, {"content", item.content}, {"url", item.url}};
  if (item.date) j["date"] = *item.date;
  return j;
}

SearchResultItem search_item_from_json(const Json& j) {
  SearchResultItem item;
  item.id = j.value("id", 0);
  item.title = j.value("title", "");
  if (j.contains("content") && j["content"].is_string()) {
    item.content = j["content"].get<std::string>();
  } else {
    item.content = j.value("snippet", "");
  }
  item.url = j.value("url", "");
  if (j.contains("date") && j["date"].is_string()) item.date = j["date"].get<std::string>();
  return item;
}

std::vector<SearchResultItem> HttpSearchBackend::search(const std::string& query) {
  const HttpResponse res = http_post_json(endpoint_, Json{{"query", query}, {"top_k", 10}});
  if (res.status < 200 || res.status >= 300) {
    throw Error(ErrorCode::BackendFailure, fmt::format("search returned HTTP {}", res.status));
  }
  std::vector<SearchResultItem> items;
  try {
    const Json doc = Json::parse(res.body);
    const Json* list = &doc;
    if (doc.is_object()) {
      if (doc.contains("results")) {
        list = &doc["results"];
      } else if (doc.contains("search_result")) {
        list = &doc["search_result"];
      }
    }
    if (!list->is_array()) throw Error(ErrorCode::BackendFailure, "search response has no result list");
    for (const Json& entry : *list) items.push_back(search_item_from_json(entry));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BackendFailure, fmt::format("malformed search response: {}", e.what()));
  }
  return items;
}

std::vector<SearchResultItem> StaticSearchBackend::search(const std::string& query) {
  const auto it = table_.find(query);
  return it == table_.end() ? std::vector<SearchResultItem>{} : it->second;
}

HttpFetchBackend::HttpFetchBackend(std::string reader_prefix, std::string api_key, std::chrono::milliseconds timeout)
    : reader_prefix_(std::move(reader_prefix)), api_key_(std::move(api_key)), timeout_(timeout) {}

std::string HttpFetchBackend::fetch_text(const std::string& url) {
  HttpResponse res;
  try {
    res = reader_prefix_.empty() ? http_get(url, timeout_) : http_get(reader_prefix_ + url, timeout_, api_key_);
  } catch (const Error& e) {
    throw Error(ErrorCode::FetchFailure, e.what());
  }
  if (res.status < 200 || res.status >= 300) {
    throw Error(ErrorCode::FetchFailure, fmt::format("{} returned HTTP {}", url, res.status));
  }
  const bool html = res.content_type.find("html") != std::string::npos ||
                    res.body.find("<html") != std::string::npos || res.body.find("<body") != std::string::npos;
  return html ? html_to_text(res.body) : collapse_whitespace(res.body);
}

std::string StaticFetchBackend::fetch_text(const std::string& url) {
  const auto it = pages_.find(url);
  if (it == pages_.end()) throw Error(ErrorCode::FetchFailure, "no page for " + url);
  return html_to_text(it->second);
}

Json normalize_summary(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::AssistantFailure, "summary is not an object");
  Json evidence = Json::array();
  if (const auto e = j.find("evidence"); e != j.end()) {
    if (e->is_array()) {
      for (const Json& item : *e) evidence.push_back(item.is_string() ? item.get<std::string>() : item.dump());
    } else if (e->is_string()) {
      evidence.push_back(e->get<std::string>());
    }
  }
  const auto text_field = [&j](const char* key) {
    const auto it = j.find(key);
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
  };
  std::string rational = text_field("rational");
  if (rational.empty()) rational = text_field("rationale");
  const std::string summary = text_field("summary");
  if (summary.empty()) throw Error(ErrorCode::AssistantFailure, "summary field missing");
  return Json{{"rational", rational}, {"evidence", evidence}, {"summary", summary}};
}

Json HttpAssistantBackend::summarize(const std::string& goal, const std::string& page_text) {
  const std::string prompt = fmt::format(
      "Read the web page content below and extract what is relevant to the goal.\n"
      "Goal: {}\n\nPage content:\n{}\n\n"
      "Respond with only a JSON object: {{\"rational\": string, \"evidence\": [string], \"summary\": string}}",
      goal, page_text);
  SamplingParams sampling;
  sampling.temperature = 0.0;
  sampling.top_p = 1.0;
  ChatResult res;
  try {
    res = chat_complete(endpoint_, model_, Json::array({{{"role", "user"}, {"content", prompt}}}), sampling, {});
  } catch (const Error& e) {
    throw Error(ErrorCode::AssistantFailure, e.what());
  }
  const std::size_t open = res.text.find('{');
  const std::size_t close = res.text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorCode::AssistantFailure, "assistant output contains no JSON object");
  }
  try {
    return normalize_summary(parse_structured_literal(std::string_view(res.text).substr(open, close - open + 1)));
  } catch (const Error& e) {
    throw Error(ErrorCode::AssistantFailure, e.what());
  }
}

namespace {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    cur += text[i];
    const bool ascii_end = text[i] == '.' || text[i] == '!' || text[i] == '?';
    // U+3002 IDEOGRAPHIC FULL STOP
    const bool cjk_end = i >= 2 && static_cast<unsigned char>(text[i - 2]) == 0xE3 &&
                         static_cast<unsigned char>(text[i - 1]) == 0x80 && static_cast<unsigned char>(text[i]) == 0x82;
    if (ascii_end || cjk_end) {
      out.push_back(collapse_whitespace(cur));
      cur.clear();
    }
  }
  if (!collapse_whitespace(cur).empty()) out.push_back(collapse_whitespace(cur));
  std::erase_if(out, [](const std::string& s) { return s.empty(); });
  return out;
}

std::set<std::string> terms(const std::string& text) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(cur);
  return out;
}

}  // namespace

Json ExtractiveAssistantBackend::summarize(const std::string& goal, const std::string& page_text) {
  const auto goal_terms = terms(goal);
  const auto sentences = split_sentences(page_text);
  std::vector<std::pair<std::size_t, std::size_t>> scored;  // (overlap, index)
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::size_t overlap = 0;
    for (const auto& t : terms(sentences[i])) overlap += goal_terms.count(t);
    if (overlap > 0) scored.emplace_back(overlap, i);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (scored.size() > 3) scored.resize(3);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  Json evidence = Json::array();
  std::string summary;
  for (const auto& [overlap, idx] : scored) {
    evidence.push_back(sentences[idx]);
    if (!summary.empty()) summary += ' ';
    summary += sentences[idx];
  }
  if (summary.empty()) summary = "No content relevant to the goal was found.";
  return Json{{"rational", fmt::format("Selected {} sentence(s) sharing terms with the goal.", evidence.size())},
              {"evidence", evidence},
              {"summary", summary}};
}

}  // namespace tir
