#include "reni/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace reni {

FloatImage read_png_gray(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error(path.string() + ": " + img.message);
  img.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error(path.string() + ": " + img.message);
  }
  FloatImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = 1;
  out.data.resize(buffer.size());
  std::transform(buffer.begin(), buffer.end(), out.data.begin(), [](png_byte b) { return b / 255.0f; });
  return out;
}

void write_png_preview(const FloatImage& image, const std::filesystem::path& path) {
  std::vector<png_byte> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double x = std::max(0.0, static_cast<double>(image.data[i]));
    const double v = std::pow(x / (1.0 + x), 1.0 / 2.2);
    bytes[i] = static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw std::runtime_error(path.string() + ": " + img.message);
}

}  // namespace reni
