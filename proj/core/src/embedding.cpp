#include "tir/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "tir/error.hpp"
#include "tir/json_util.hpp"

namespace tir {

Embedding HashProjectionEmbedder::embed(const Image& image) {
  const std::string digest = image_digest(image);
  const std::uint64_t seed = std::stoull(digest.substr(0, 16), nullptr, 16);
  std::mt19937_64 rng(seed);
  // Box-Muller by hand so the output does not depend on the standard
  // library's distribution implementation.
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0); };
  Embedding v(dim_);
  for (std::size_t i = 0; i < dim_; i += 2) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
    if (i + 1 < dim_) v[i + 1] = static_cast<float>(r * std::sin(2.0 * std::numbers::pi * u2));
  }
  return normalized(std::move(v));
}

Embedding HttpEmbedBackend::embed(const Image& image) {
  const auto png = encode_png(image);
  const HttpResponse resp = http_post_json(endpoint_, Json{{"image", base64_encode(png)}});
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::BackendFailure, fmt::format("embedding service returned HTTP {}", resp.status));
  }
  Embedding v;
  try {
    const Json body = Json::parse(resp.body);
    const Json& arr = body.is_array() ? body : body.at("embedding");
    for (const auto& x : arr) v.push_back(x.get<float>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BackendFailure, std::string("malformed embedding response: ") + e.what());
  }
  if (v.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, fmt::format("expected {} dims, service returned {}", dim_, v.size()));
  }
  return normalized(std::move(v));
}

Embedding normalized(Embedding v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) throw Error(ErrorCode::ArgValidation, "embedding has zero or non-finite norm");
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
  return v;
}

bool is_unit_norm(std::span<const float> v, double tol) {
  return std::abs(std::sqrt(dot(v, v)) - 1.0) <= tol;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double confidence_from_cosine(double s) { return std::clamp((s + 1.0) / 2.0, 0.0, 1.0); }

std::string format_confidence(double confidence) { return fmt::format("{:.2f}", confidence); }

}  // namespace tir
