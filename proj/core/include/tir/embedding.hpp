#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tir/http.hpp"
#include "tir/image.hpp"

namespace tir {

using Embedding = std::vector<float>;

/// Image -> fixed-dimension unit vector. Must be deterministic per image.
class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  virtual Embedding embed(const Image& image) = 0;
};

/// Seeds a Gaussian projection from the image content hash. Identical images
/// map to identical vectors; distinct images are nearly orthogonal.
class HashProjectionEmbedder final : public EmbedBackend {
 public:
  explicit HashProjectionEmbedder(std::size_t dim = 64) : dim_(dim) {}
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  Embedding embed(const Image& image) override;

 private:
  std::size_t dim_;
};

/// POSTs {"image": <base64 PNG>} and reads {"embedding": [...]}.
class HttpEmbedBackend final : public EmbedBackend {
 public:
  HttpEmbedBackend(HttpEndpoint endpoint, std::size_t dim) : endpoint_(std::move(endpoint)), dim_(dim) {}
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  Embedding embed(const Image& image) override;

 private:
  HttpEndpoint endpoint_;
  std::size_t dim_;
};

/// Throws Error(ArgValidation) for a zero or non-finite vector.
Embedding normalized(Embedding v);
bool is_unit_norm(std::span<const float> v, double tol = 1e-6);
double dot(std::span<const float> a, std::span<const float> b);

/// Cosine similarity in [-1, 1] mapped onto [0, 1].
double confidence_from_cosine(double s);
/// Two-decimal rendering used in observations.
std::string format_confidence(double confidence);

}  // namespace tir
