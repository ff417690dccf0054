#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "tir/json_util.hpp"

namespace tir {

struct Url {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string target;  // path plus query, starts with '/'
};

std::optional<Url> parse_url(const std::string& text);

struct HttpEndpoint {
  std::string url;
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::string content_type;
};

/// Transport failures throw Error(Timeout) when the deadline elapsed and
/// Error(BackendFailure) otherwise. Non-2xx statuses are returned, not thrown.
HttpResponse http_get(const std::string& url, std::chrono::milliseconds timeout, const std::string& api_key = {});
HttpResponse http_post_json(const HttpEndpoint& endpoint, const Json& body);

struct SamplingParams {
  double temperature = 0.7;
  double top_p = 0.95;
  int max_tokens = 2048;
  std::optional<std::uint64_t> seed;
};

struct ChatResult {
  std::string text;
  std::string finish_reason;
};

/// OpenAI-style /chat/completions call. `endpoint.url` is the full URL.
ChatResult chat_complete(const HttpEndpoint& endpoint, const std::string& model, const Json& messages,
                         const SamplingParams& sampling, const std::vector<std::string>& stop);

}  // namespace tir
