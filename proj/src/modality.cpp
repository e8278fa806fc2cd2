#include "aesthetic/modality.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

#include "aesthetic/error.hpp"
#include "text_util.hpp"

namespace aesthetic {
namespace {

constexpr int kSaliencySize = 64;
// Frequency bins weaker than this carry no usable phase; they stay empty.
constexpr double kEmptyBinAmplitude = 1e-9;

void clamp_unit(Image& img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
}

// Center-relative accumulation keeps constant images exact fixed points.
Image separable_convolve(const Image& img, const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  Image tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double center = img.at(x, y, c);
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] * (img.clamped(x + k, y, c) - center);
        }
        tmp.at(x, y, c) = center + acc;
      }
    }
  }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        const double center = tmp.at(x, y, c);
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[static_cast<std::size_t>(k + radius)] * (tmp.clamped(x, y + k, c) - center);
        }
        out.at(x, y, c) = center + acc;
      }
    }
  }
  return out;
}

Image gaussian_blur_raw(const Image& img, int ksize) {
  if (ksize == 1) return img;
  return separable_convolve(img, gaussian_kernel(ksize));
}

Image min_max_normalize(const Image& img) {
  auto px = img.pixels();
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  Image out(img.width(), img.height(), img.channels(), 0.0);
  if (*hi == *lo) return out;
  const double lo_v = *lo;
  const double span = *hi - *lo;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) dst[i] = std::clamp((px[i] - lo_v) / span, 0.0, 1.0);
  return out;
}

// FFTW planning is not thread-safe; execution on fresh arrays is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

std::vector<std::complex<double>> dft2(const std::vector<std::complex<double>>& in, int w, int h,
                                       int direction) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  FftwBuffer src(fftw_alloc_complex(n));
  FftwBuffer dst(fftw_alloc_complex(n));
  for (std::size_t i = 0; i < n; ++i) {
    src[i][0] = in[i].real();
    src[i][1] = in[i].imag();
  }
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, src.get(), dst.get(), direction, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {dst[i][0], dst[i][1]};
  return out;
}

}  // namespace

std::string_view to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::RGB: return "rgb";
    case ModalityKind::Blur: return "blur";
    case ModalityKind::Saliency: return "saliency";
    case ModalityKind::Depth: return "depth";
  }
  return "unknown";
}

ModalityKind parse_modality(std::string_view name) {
  const std::string lower = detail::to_lower(detail::trim(name));
  if (lower == "rgb") return ModalityKind::RGB;
  if (lower == "blur") return ModalityKind::Blur;
  if (lower == "saliency") return ModalityKind::Saliency;
  if (lower == "depth") return ModalityKind::Depth;
  throw Error(ErrorCode::ParseError, "unknown modality '" + std::string(name) + "'");
}

std::vector<double> gaussian_kernel(int ksize) {
  if (ksize < 1 || ksize % 2 == 0) {
    throw Error(ErrorCode::EvenKernel, "kernel size must be odd and >= 1, got " + std::to_string(ksize));
  }
  const double sigma = 0.3 * ((ksize - 1) * 0.5 - 1.0) + 0.8;
  const int radius = ksize / 2;
  std::vector<double> taps(static_cast<std::size_t>(ksize));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

Image gaussian_blur(const Image& img, int ksize) {
  gaussian_kernel(ksize);  // validates
  Image out = gaussian_blur_raw(img, ksize);
  clamp_unit(out);
  return out;
}

Image bilateral_filter(const Image& img, int d, double sigma_color, double sigma_space) {
  if (d < 1) throw Error(ErrorCode::InvalidParams, "bilateral diameter must be >= 1");
  if (!(sigma_color > 0.0) || !(sigma_space > 0.0)) {
    throw Error(ErrorCode::NonPositiveSigma, "bilateral sigmas must be positive");
  }
  const int lo = -((d - 1) / 2);
  const int hi = lo + d - 1;
  const double space_coeff = -0.5 / (sigma_space * sigma_space);
  const double color_coeff = -0.5 / (sigma_color * sigma_color);

  std::vector<double> space_w;
  space_w.reserve(static_cast<std::size_t>(d) * d);
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) space_w.push_back(std::exp((dx * dx + dy * dy) * space_coeff));
  }

  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  Image out(w, h, ch);
  std::vector<double> acc(static_cast<std::size_t>(ch));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double total = 0.0;
      std::size_t k = 0;
      for (int dy = lo; dy <= hi; ++dy) {
        for (int dx = lo; dx <= hi; ++dx, ++k) {
          double dist2 = 0.0;
          for (int c = 0; c < ch; ++c) {
            const double diff = 255.0 * (img.clamped(x + dx, y + dy, c) - img.at(x, y, c));
            dist2 += diff * diff;
          }
          const double weight = space_w[k] * std::exp(dist2 * color_coeff);
          total += weight;
          for (int c = 0; c < ch; ++c) {
            acc[static_cast<std::size_t>(c)] += weight * (img.clamped(x + dx, y + dy, c) - img.at(x, y, c));
          }
        }
      }
      for (int c = 0; c < ch; ++c) {
        out.at(x, y, c) = std::clamp(img.at(x, y, c) + acc[static_cast<std::size_t>(c)] / total, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image resize(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw Error(ErrorCode::InvalidImage, "resize target must be >= 1x1");
  if (out_w == img.width() && out_h == img.height()) return img;
  const double sx = static_cast<double>(img.width()) / out_w;
  const double sy = static_cast<double>(img.height()) / out_h;
  const int ch = img.channels();
  Image out(out_w, out_h, ch);
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < ch; ++c) {
        const double top = std::lerp(img.at(x0, y0, c), img.at(x1, y0, c), tx);
        const double bottom = std::lerp(img.at(x0, y1, c), img.at(x1, y1, c), tx);
        out.at(x, y, c) = std::lerp(top, bottom, ty);
      }
    }
  }
  return out;
}

Image blur_modality(const Image& img) {
  if (img.width() < 9 || img.height() < 9) {
    throw Error(ErrorCode::ImageTooSmall, "blur modality needs at least 9x9 pixels");
  }
  Image out = gaussian_blur(img, 9);
  out = bilateral_filter(out, 20, 50.0, 50.0);
  out = resize(out, 32, 32);
  out = gaussian_blur(out, 3);
  return resize(out, img.width(), img.height());
}

Image spectral_residual_saliency(const Image& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw Error(ErrorCode::ImageTooSmall, "saliency needs at least 3x3 pixels");
  }
  const int n = kSaliencySize;
  const Image small = resize(to_gray(img), n, n);

  std::vector<std::complex<double>> signal(static_cast<std::size_t>(n) * n);
  auto px = small.pixels();
  for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = px[i];
  const auto spectrum = dft2(signal, n, n, FFTW_FORWARD);

  Image log_amp(n, n, 1);
  auto la = log_amp.pixels();
  for (std::size_t i = 0; i < spectrum.size(); ++i) la[i] = std::log1p(std::abs(spectrum[i]));

  Image smoothed(n, n, 1);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) acc += log_amp.clamped(x + dx, y + dy);
      }
      smoothed.at(x, y) = acc / 9.0;
    }
  }

  std::vector<std::complex<double>> residual(spectrum.size());
  auto sm = smoothed.pixels();
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double amp = std::abs(spectrum[i]);
    if (amp <= kEmptyBinAmplitude) continue;
    residual[i] = std::exp(la[i] - sm[i]) * (spectrum[i] / amp);
  }
  const auto back = dft2(residual, n, n, FFTW_BACKWARD);

  Image energy(n, n, 1);
  auto en = energy.pixels();
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (std::size_t i = 0; i < back.size(); ++i) en[i] = std::norm(back[i] * scale);

  const Image map = min_max_normalize(gaussian_blur_raw(energy, 9));
  // Interpolating back can shave the peak, so stretch once more.
  return min_max_normalize(resize(map, img.width(), img.height()));
}

Image validate_depth(const Image& depth, const Image& reference) {
  if (depth.channels() != 1) {
    throw Error(ErrorCode::NotSingleChannel, "depth maps must have one channel");
  }
  return min_max_normalize(resize(depth, reference.width(), reference.height()));
}

Image validate_depth(const Image& depth) {
  if (depth.channels() != 1) {
    throw Error(ErrorCode::NotSingleChannel, "depth maps must have one channel");
  }
  return min_max_normalize(depth);
}

Image apply_modality(ModalityKind kind, const Image& img) {
  switch (kind) {
    case ModalityKind::RGB: return img;
    case ModalityKind::Blur: return blur_modality(img);
    case ModalityKind::Saliency: return spectral_residual_saliency(img);
    case ModalityKind::Depth: break;
  }
  throw Error(ErrorCode::InvalidParams, "depth maps are ingested, not computed");
}

std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = detail::split_fields(body, ',');
    if (fields.size() != 3 && fields.size() != 4) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                             ": expected 'source_path, modality, output_path'");
    }
    ManifestEntry entry;
    entry.line = line_no;
    entry.source = fields[0];
    try {
      entry.modality = parse_modality(fields[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    entry.output = fields[2];
    if (fields.size() == 4) {
      if (entry.modality != ModalityKind::Depth) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                               ": a reference path is only valid for depth entries");
      }
      entry.reference = fields[3];
    }
    if (entry.source.empty() || entry.output.empty()) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": empty path");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace aesthetic
