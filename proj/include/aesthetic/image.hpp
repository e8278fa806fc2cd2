#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace aesthetic {

/// Row-major, channel-interleaved floating-point image.
///
/// Pixel values of ordinary images live in [0,1]; the raw depth path is the
/// one place where arbitrary ranges are carried (see `is_unit_range`).
class Image {
 public:
  Image() = default;
  /// Throws Error{InvalidImage} on zero dimensions or channels not in {1,3}.
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  /// Edge-replicating accessor.
  double clamped(int x, int y, int c = 0) const;

  std::span<double> pixels() noexcept { return pixels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  bool is_unit_range() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> pixels_;
};

/// 0.299 R + 0.587 G + 0.114 B; single-channel images are returned as-is.
Image to_gray(const Image& img);

/// 8-bit PNG I/O. Gray and gray+alpha load as 1 channel, everything else as
/// 3 (alpha dropped). Values map by v/255 on load and round(v*255) on save.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

/// Portable float map ("Pf" grayscale / "PF" color), the raw path for depth
/// maps of arbitrary range. Rows are stored bottom-to-top per the format.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const Image& img, const std::filesystem::path& path);

/// Dispatches on extension: .pfm goes through the raw path, anything else PNG.
Image read_image(const std::filesystem::path& path);

/// round(v*255) clamped to [0,255], divided back; the grid PNG can store.
Image quantize_8bit(const Image& img);

}  // namespace aesthetic
