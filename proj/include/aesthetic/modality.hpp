#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aesthetic/image.hpp"

namespace aesthetic {

enum class ModalityKind { RGB, Blur, Saliency, Depth };

std::string_view to_string(ModalityKind kind);
/// Case-insensitive; throws Error{ParseError} on unknown names.
ModalityKind parse_modality(std::string_view name);

/// 1-D Gaussian taps for an odd `ksize`, sigma = 0.3*((ksize-1)*0.5 - 1) + 0.8.
std::vector<double> gaussian_kernel(int ksize);

/// Separable Gaussian blur with edge replication. Throws Error{EvenKernel}.
Image gaussian_blur(const Image& img, int ksize);

/// Edge-preserving smoothing over a d x d window (even d: extra row/column
/// toward higher indices). Color distance is Euclidean over channels on the
/// 0..255 scale. Throws Error{NonPositiveSigma}, Error{InvalidParams} for d < 1.
Image bilateral_filter(const Image& img, int d, double sigma_color, double sigma_space);

/// Bilinear resize with half-pixel-centered sampling.
Image resize(const Image& img, int out_w, int out_h);

/// Gaussian(9) -> bilateral(20, 50, 50) -> 32x32 -> Gaussian(3) -> original size,
/// per channel. Throws Error{ImageTooSmall} below 9x9.
Image blur_modality(const Image& img);

/// Spectral residual saliency at a 64x64 working size; single-channel output
/// in [0,1] with the input's dimensions. Throws Error{ImageTooSmall} below 3x3.
Image spectral_residual_saliency(const Image& img);

/// Resizes an ingested single-channel depth map to `reference` and min-max
/// normalizes it; constant maps become all-zero. Throws Error{NotSingleChannel}.
Image validate_depth(const Image& depth, const Image& reference);
/// Same without a reference image: normalization at native size.
Image validate_depth(const Image& depth);

/// RGB (identity), Blur or Saliency. Depth is ingest-only and rejected here.
Image apply_modality(ModalityKind kind, const Image& img);

/// One line of a batch manifest: `source_path, modality, output_path`.
/// Depth lines may carry a fourth `reference_path` field naming the image
/// whose dimensions the depth map is resized to.
struct ManifestEntry {
  std::filesystem::path source;
  ModalityKind modality = ModalityKind::RGB;
  std::filesystem::path output;
  std::optional<std::filesystem::path> reference;
  int line = 0;
};

/// Blank lines and lines starting with '#' are skipped. Throws Error{ParseError}.
std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path);

}  // namespace aesthetic
