#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tir {

/// 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  [[nodiscard]] bool empty() const { return width <= 0 || height <= 0; }
  [[nodiscard]] std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  [[nodiscard]] const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Pixel box; (x1, y1) top-left inclusive, (x2, y2) bottom-right exclusive.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  [[nodiscard]] int width() const { return x2 - x1; }
  [[nodiscard]] int height() const { return y2 - y1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Rejects inverted boxes, then clamps to the image and rejects empty
/// results. Throws Error(InvalidBBox).
BBox clamp_bbox(const BBox& box, int width, int height);

/// Crops after clamping. Throws Error(InvalidBBox).
Image crop(const Image& image, const BBox& box);

/// Decodes binary PPM (P6), ASCII PPM (P3) or PNG. Throws Error(ImageDecode).
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const Image& image);
std::vector<std::uint8_t> encode_png(const Image& image);

/// Content hash over dimensions and pixels.
std::string image_digest(const Image& image);

}  // namespace tir
