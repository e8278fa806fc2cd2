#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aesthetic/distribution.hpp"
#include "aesthetic/image.hpp"

namespace aesthetic {

using VoteCounts = std::array<std::int64_t, kScoreBins>;

/// One row of an AVA-style vote file.
struct LabeledImage {
  std::int64_t index = 0;
  std::string id;
  std::filesystem::path image_path;
  VoteCounts gt_counts{};
  ScoreDistribution gt;  // normalize(gt_counts)
  std::vector<std::int64_t> tags;
  std::int64_t challenge_id = 0;
};

/// Parses `index imageId c1 .. c10 tag1 tag2 challengeId` lines. Blank lines
/// are skipped. When `image_dir` is non-empty each record's image_path is
/// image_dir / (id + extension). Throws Error{ParseError} or
/// Error{AllZeroCounts}, both naming the line.
std::vector<LabeledImage> parse_vote_file(const std::filesystem::path& path,
                                          const std::filesystem::path& image_dir = {},
                                          const std::string& extension = ".png");
void write_vote_file(const std::vector<LabeledImage>& records, const std::filesystem::path& path);

/// Mean of the per-image mean scores, summed in file order.
double dataset_mean_score(const std::vector<LabeledImage>& records);

enum class CategoryKind { Scored, OneHot };

/// Per-image category values keyed by image id: scores in [1,4] (Scored) or
/// 0/1 indicators (OneHot).
struct CategoryTable {
  std::vector<std::string> category_names;
  CategoryKind kind = CategoryKind::Scored;
  std::map<std::string, std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

/// Header row `id,<category>,...`. Throws Error{RangeError},
/// Error{DuplicateId} or Error{ParseError}.
CategoryTable parse_category_csv(const std::filesystem::path& path, CategoryKind kind);

/// Per-id real values from a two-column CSV with a header (`id,value`).
std::map<std::string, double> parse_id_value_csv(const std::filesystem::path& path);

struct ImageStatistics {
  double brightness = 0.0;    // mean luma
  double edge_density = 0.0;  // 4 * mean central-difference gradient magnitude, clipped to [0,1]
  double contrast = 0.0;      // 2 * luma standard deviation, clipped to [0,1]
};

ImageStatistics image_statistics(const Image& img);

/// Synthetic label rule: mean 1 + 9*(0.5*brightness + 0.5*edge_density),
/// spread 0.5 + contrast.
struct SynthLabel {
  double mean = 0.0;
  double sigma = 0.0;
};
SynthLabel synth_label(const ImageStatistics& stats);

/// Normal density integrated over [i-0.5, i+0.5] for i = 1..10, restricted
/// to [0.5, 10.5] and renormalized.
BinArray discretized_normal(double mean, double sigma);

/// Integer votes summing to `total` (largest remainder) approximating `probs`.
VoteCounts votes_from_probs(const BinArray& probs, std::int64_t total = 10000);

struct SynthSample {
  LabeledImage label;
  Image image;  // 3-channel, already on the 8-bit grid
};

/// Shapes on graded backgrounds with sinusoidal texture; labels follow
/// `synth_label`. Image i is drawn from its own generator seeded by
/// seed ^ (i * 0x9E3779B97F4A7C15), so samples do not depend on n. Draws
/// whose discretized label mean would sit more than 0.05 from the rule mean
/// (truncation at the ends of the scale) are redrawn from the same generator.
std::vector<SynthSample> synth_dataset(int n, std::uint64_t seed, int size);

/// Train/val/test fractions; val and test take floor(n * fraction), train the remainder.
struct SplitSpec {
  std::uint64_t seed = 0;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  /// Throws Error{InvalidParams}.
  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Deterministic seeded shuffle, then partition. Each part is sorted.
SplitIndices split(std::size_t count, const SplitSpec& spec);

}  // namespace aesthetic
