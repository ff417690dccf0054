#include "tir/image.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <string_view>

#include <fmt/format.h>
#include <png.h>

#include "tir/error.hpp"
#include "tir/json_util.hpp"

namespace tir {

BBox clamp_bbox(const BBox& box, int width, int height) {
  if (box.x1 >= box.x2 || box.y1 >= box.y2) {
    throw Error(ErrorCode::InvalidBBox,
                fmt::format("[{}, {}, {}, {}] is not a top-left/bottom-right box", box.x1, box.y1, box.x2, box.y2));
  }
  BBox c{std::clamp(box.x1, 0, width), std::clamp(box.y1, 0, height), std::clamp(box.x2, 0, width),
         std::clamp(box.y2, 0, height)};
  if (c.x1 >= c.x2 || c.y1 >= c.y2) {
    throw Error(ErrorCode::InvalidBBox, fmt::format("[{}, {}, {}, {}] lies outside the {}x{} image", box.x1, box.y1,
                                                    box.x2, box.y2, width, height));
  }
  return c;
}

Image crop(const Image& image, const BBox& box) {
  const BBox c = clamp_bbox(box, image.width, image.height);
  Image out(c.width(), c.height());
  const std::size_t row_bytes = static_cast<std::size_t>(c.width()) * 3;
  for (int y = 0; y < c.height(); ++y) {
    std::memcpy(out.pixel(0, y), image.pixel(c.x1, c.y1 + y), row_bytes);
  }
  return out;
}

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip();
    long v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw Error(ErrorCode::ImageDecode, "PPM header value too large");
      any = true;
    }
    if (!any) throw Error(ErrorCode::ImageDecode, "malformed PPM header");
    return static_cast<int>(v);
  }

  void skip() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t pos_ = 2;
  std::span<const std::uint8_t> bytes_;
};

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  const bool binary = bytes[1] == '6';
  PnmReader r(bytes);
  const int w = r.next_int();
  const int h = r.next_int();
  const int maxval = r.next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw Error(ErrorCode::ImageDecode, "unsupported PPM");
  Image img(w, h);
  if (binary) {
    ++r.pos_;  // single whitespace byte after maxval
    if (bytes.size() < r.pos_ + img.rgb.size()) throw Error(ErrorCode::ImageDecode, "truncated PPM data");
    std::memcpy(img.rgb.data(), bytes.data() + r.pos_, img.rgb.size());
  } else {
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(r.next_int());
  }
  if (maxval != 255) {
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(v * 255 / maxval);
  }
  return img;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::ImageDecode, png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::ImageDecode, png.message);
  }
  return img;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '3')) return decode_ppm(bytes);
  throw Error(ErrorCode::ImageDecode, "unrecognized image format (expected PNG or PPM)");
}

Image load_image(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ImageDecode, e.what());
  }
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_ppm(const Image& image) {
  const std::string header = fmt::format("P6\n{} {}\n255\n", image.width, image.height);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::ImageDecode, png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::ImageDecode, png.message);
  }
  out.resize(size);
  return out;
}

std::string image_digest(const Image& image) {
  std::string data = fmt::format("{}x{}:", image.width, image.height);
  data.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  return sha256_hex(data);
}

}  // namespace tir
