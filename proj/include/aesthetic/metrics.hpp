#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aesthetic/distribution.hpp"

namespace aesthetic {

inline constexpr double kGoodThreshold = 5.0;
inline constexpr double kAvaMeanThreshold = 5.38331;

/// Per-image evaluation summary. Only the moments and the pure EMD are kept,
/// which is all any metric or analysis reads and what the record CSV stores.
struct EvalRecord {
  std::string id;
  double gt_mean = 0.0;
  double gt_std = 0.0;
  double pred_mean = 0.0;
  double pred_std = 0.0;
  double emd2 = 0.0;

  static EvalRecord from_distributions(std::string id, const ScoreDistribution& gt,
                                       const ScoreDistribution& pred);
};

/// Percent of records where pred and gt means fall on the same side of
/// `threshold` (strict >). Throws Error{EmptyInput}.
double two_class_accuracy(std::span<const EvalRecord> records, double threshold);
/// Percent of records whose gt mean exceeds `threshold`.
double baseline_accuracy(std::span<const EvalRecord> records, double threshold);

/// Sample Pearson coefficient. Throws Error{ShapeMismatch} on unequal lengths,
/// Error{EmptyInput} below two samples and Error{DegenerateVariance}.
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson over average ranks.
double spearman(std::span<const double> x, std::span<const double> y);
/// 1-based ranks; tied values share the mean of their rank span.
std::vector<double> average_ranks(std::span<const double> v);

struct CorrelationSuite {
  double lcc_mean = 0.0;
  double srcc_mean = 0.0;
  double lcc_std = 0.0;
  double srcc_std = 0.0;
};
CorrelationSuite correlation_suite(std::span<const EvalRecord> records);

/// Mean emd2. Throws Error{EmptyInput}.
double mean_emd(std::span<const EvalRecord> records);

struct HistogramRange {
  int bins = 100;
  double lo = 1.0;
  double hi = 10.0;

  /// Throws Error{InvalidParams}.
  void validate() const;
  /// Bin of `v`; values outside the range land in the end bins.
  std::size_t bin_of(double v) const;
};

inline constexpr HistogramRange kMeanHistogram{100, 1.0, 10.0};
inline constexpr HistogramRange kStdHistogram{100, 0.0, 5.0};

std::vector<std::size_t> make_histogram(std::span<const double> values, const HistogramRange& range);

/// Sum over bins of |cumulative count difference| divided by the bin count.
double histogram_emd(std::span<const double> pred_values, std::span<const double> gt_values,
                     const HistogramRange& range);

struct ScoreBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_emd;  // absent when count == 0

  double center() const noexcept { return 0.5 * (lo + hi); }
};

struct ScoreBinSpec {
  double width = 0.25;
  double lo = 1.0;
  double hi = 10.0;

  /// Throws Error{InvalidParams}.
  void validate() const;
  std::size_t bin_count() const;
};

/// Groups records by gt mean into left-closed bins of `spec.width` and
/// averages emd2 per bin. Means outside the range go to the end bins.
std::vector<ScoreBin> score_bin_emd(std::span<const EvalRecord> records, const ScoreBinSpec& spec = {});

struct MetricReport {
  double acc_at_5 = 0.0;
  double acc_at_mean = 0.0;
  double baseline_at_5 = 0.0;
  double baseline_at_mean = 0.0;
  double lcc_mean = 0.0;
  double srcc_mean = 0.0;
  double lcc_std = 0.0;
  double srcc_std = 0.0;
  double mean_emd = 0.0;
  double histogram_emd_mean = 0.0;
  double histogram_emd_std = 0.0;

  std::string to_json() const;
  std::string to_csv() const;  // header + one row
};

struct ReportOptions {
  double threshold_good = kGoodThreshold;
  double threshold_mean = kAvaMeanThreshold;
  HistogramRange mean_hist = kMeanHistogram;
  HistogramRange std_hist = kStdHistogram;
};

/// Throws Error{EmptyInput} or propagates Error{DegenerateVariance}.
MetricReport make_report(std::span<const EvalRecord> records, const ReportOptions& options = {});

// CSV I/O. Record CSV: `id,gt_mean,gt_std,pred_mean,pred_std,emd2`.
std::string records_to_csv(std::span<const EvalRecord> records);
std::vector<EvalRecord> records_from_csv(const std::string& text, const std::string& source = "<records>");
/// `bin_center,mean_emd,count`; an absent mean is an empty field.
std::string score_bins_to_csv(std::span<const ScoreBin> bins);
/// `bin_center,pred_count,gt_count`.
std::string histograms_to_csv(std::span<const double> pred_values, std::span<const double> gt_values,
                              const HistogramRange& range);

}  // namespace aesthetic
