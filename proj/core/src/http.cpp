#include "tir/http.hpp"

#include <regex>

#include <fmt/format.h>
#include <httplib.h>

#include "tir/error.hpp"

namespace tir {

std::optional<Url> parse_url(const std::string& text) {
  static const std::regex re(R"(^(https?)://([^/:?#\s]+)(?::(\d{1,5}))?([^\s#]*)(?:#\S*)?$)",
                             std::regex::icase);
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  Url u;
  u.scheme = m[1].str();
  for (auto& c : u.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  u.host = m[2].str();
  u.port = m[3].matched ? std::stoi(m[3].str()) : (u.scheme == "https" ? 443 : 80);
  u.target = m[4].str();
  if (u.target.empty()) u.target = "/";
  if (u.target.front() == '?') u.target = "/" + u.target;
  if (u.port <= 0 || u.port > 65535) return std::nullopt;
  return u;
}

namespace {

httplib::Headers make_headers(const std::string& api_key) {
  httplib::Headers h;
  if (!api_key.empty()) h.emplace("Authorization", "Bearer " + api_key);
  return h;
}

template <typename Fn>
HttpResponse perform(const std::string& url, std::chrono::milliseconds timeout, Fn&& fn) {
  const auto u = parse_url(url);
  if (!u) throw Error(ErrorCode::BackendFailure, "malformed URL: " + url);
  httplib::Client client(fmt::format("{}://{}:{}", u->scheme, u->host, u->port));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_follow_location(true);
  const auto start = std::chrono::steady_clock::now();
  httplib::Result res = fn(client, u->target);
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - start;
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout) {
      throw Error(ErrorCode::Timeout, fmt::format("{} after {} ms", url, timeout.count()));
    }
    throw Error(ErrorCode::BackendFailure, fmt::format("{}: {}", url, httplib::to_string(err)));
  }
  return HttpResponse{res->status, res->body, res->get_header_value("Content-Type")};
}

}  // namespace

HttpResponse http_get(const std::string& url, std::chrono::milliseconds timeout, const std::string& api_key) {
  return perform(url, timeout, [&](httplib::Client& c, const std::string& target) {
    return c.Get(target, make_headers(api_key));
  });
}

HttpResponse http_post_json(const HttpEndpoint& endpoint, const Json& body) {
  const std::string payload = body.dump(-1, ' ', false, Json::error_handler_t::replace);
  return perform(endpoint.url, endpoint.timeout, [&](httplib::Client& c, const std::string& target) {
    return c.Post(target, make_headers(endpoint.api_key), payload, "application/json");
  });
}

ChatResult chat_complete(const HttpEndpoint& endpoint, const std::string& model, const Json& messages,
                         const SamplingParams& sampling, const std::vector<std::string>& stop) {
  Json body{{"messages", messages},
            {"temperature", sampling.temperature},
            {"top_p", sampling.top_p},
            {"max_tokens", sampling.max_tokens}};
  if (!model.empty()) body["model"] = model;
  if (!stop.empty()) body["stop"] = stop;
  if (sampling.seed) body["seed"] = *sampling.seed;
  const HttpResponse res = http_post_json(endpoint, body);
  if (res.status < 200 || res.status >= 300) {
    throw Error(ErrorCode::BackendFailure, fmt::format("{} returned HTTP {}", endpoint.url, res.status));
  }
  Json doc;
  try {
    doc = Json::parse(res.body);
    const Json& choice = doc.at("choices").at(0);
    ChatResult out;
    const Json& content = choice.at("message").at("content");
    out.text = content.is_string() ? content.get<std::string>() : std::string();
    if (const auto fr = choice.find("finish_reason"); fr != choice.end() && fr->is_string()) {
      out.finish_reason = fr->get<std::string>();
    }
    return out;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BackendFailure, fmt::format("malformed chat response: {}", e.what()));
  }
}

}  // namespace tir
