#include "aesthetic/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "aesthetic/error.hpp"

namespace aesthetic {
namespace {

void check_shape(int width, int height, int channels) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidImage, "image dimensions must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::InvalidImage, "channels must be 1 or 3, got " + std::to_string(channels));
  }
}

std::uint8_t to_byte(double v) {
  const double scaled = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(scaled);
}

}  // namespace

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Image::Image(int width, int height, int channels, std::vector<double> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  check_shape(width, height, channels);
  if (pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::InvalidImage, "pixel count does not match dimensions");
  }
}

double Image::clamped(int x, int y, int c) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y, c);
}

bool Image::is_unit_range() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    }
  }
  return out;
}

Image read_png(const std::filesystem::path& path) {
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&info, path.string().c_str())) {
    throw Error(ErrorCode::IoError, "cannot read PNG " + path.string() + ": " + info.message);
  }
  const bool gray = (info.format & PNG_FORMAT_FLAG_COLOR) == 0;
  // 16-bit files (typically depth maps) are read as raw linear values;
  // asking libpng for 8 bits would push them through an sRGB curve.
  const bool wide = (info.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  info.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (wide) info.format |= PNG_FORMAT_FLAG_LINEAR;
  const int channels = gray ? 1 : 3;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(info));
  if (!png_image_finish_read(&info, nullptr, buffer.data(), 0, nullptr)) {
    const std::string message = info.message;
    png_image_free(&info);
    throw Error(ErrorCode::IoError, "cannot decode PNG " + path.string() + ": " + message);
  }
  Image img(static_cast<int>(info.width), static_cast<int>(info.height), channels);
  auto px = img.pixels();
  if (wide) {
    const auto* words = reinterpret_cast<const std::uint16_t*>(buffer.data());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = words[i] / 65535.0;
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = buffer[i] / 255.0;
  }
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  png_image info;
  std::memset(&info, 0, sizeof(info));
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(img.width());
  info.height = static_cast<png_uint_32>(img.height());
  info.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(img.size());
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) buffer[i] = to_byte(px[i]);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&info, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    const std::string message = info.message;
    png_image_free(&info);
    throw Error(ErrorCode::IoError, "cannot write PNG " + path.string() + ": " + message);
  }
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "Pf" && magic != "PF") || width < 1 || height < 1 || scale == 0.0) {
    throw Error(ErrorCode::ParseError, "malformed PFM header in " + path.string());
  }
  in.get();  // single whitespace byte before the raster
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (in.gcount() != static_cast<std::streamsize>(count * 4)) {
    throw Error(ErrorCode::ParseError, "truncated PFM raster in " + path.string());
  }
  const bool host_little = std::endian::native == std::endian::little;
  Image img(width, height, channels);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = raw[(static_cast<std::size_t>(row) * width + x) * channels + c];
        if (little != host_little) bits = __builtin_bswap32(bits);
        img.at(x, y, c) = static_cast<double>(std::bit_cast<float>(bits));
      }
    }
  }
  return img;
}

void write_pfm(const Image& img, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << (img.channels() == 3 ? "PF" : "Pf") << '\n'
      << img.width() << ' ' << img.height() << '\n'
      << (std::endian::native == std::endian::little ? "-1.0" : "1.0") << '\n';
  for (int row = 0; row < img.height(); ++row) {
    const int y = img.height() - 1 - row;
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        const float v = static_cast<float>(img.at(x, y, c));
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  }
}

Image read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".pfm" ? read_pfm(path) : read_png(path);
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.pixels()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace aesthetic
