#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aesthetic/data.hpp"
#include "aesthetic/metrics.hpp"
#include "aesthetic/modality.hpp"

namespace aesthetic {

/// Evaluation records of the model trained on one modality.
struct ModalityRun {
  ModalityKind modality = ModalityKind::RGB;
  std::vector<EvalRecord> records;
};

/// Tie-break and row order: RGB, Depth, Blur, Saliency.
int modality_rank(ModalityKind kind);
inline constexpr ModalityKind kModalityOrder[] = {ModalityKind::RGB, ModalityKind::Depth,
                                                  ModalityKind::Blur, ModalityKind::Saliency};

struct PreferenceRow {
  std::string image_id;
  ModalityKind preferred = ModalityKind::RGB;
  double margin = 0.0;  // second-best emd2 minus best emd2
};

struct PreferenceResult {
  std::map<ModalityKind, std::vector<std::string>> groups;  // ids sorted
  std::vector<PreferenceRow> rows;                          // sorted by id
  std::size_t ties = 0;
  std::vector<std::string> unmatched_ids;  // present in some runs but not all

  std::string to_csv() const;  // image_id,preferred_modality,margin
};

/// Assigns each id shared by all runs to the run with the smallest emd2.
/// Throws Error{InvalidParams} (fewer than two runs, repeated modality or
/// repeated id) or Error{EmptyIntersection}.
PreferenceResult modality_preference(std::span<const ModalityRun> runs);

struct CovarianceCell {
  std::optional<double> covariance;   // absent when either side has zero variance
  std::optional<double> correlation;
  std::size_t n = 0;
};

struct CovarianceRow {
  std::vector<std::string> categories;
  std::vector<CovarianceCell> cells;
};

/// Sample covariance (n-1) of x against each category column over the ids
/// common to `x` and the table. Throws Error{EmptyIntersection}.
CovarianceRow covariance_row(const std::map<std::string, double>& x, const CategoryTable& table);

/// x = -emd2 per image.
CovarianceRow covariance_emd(const ModalityRun& run, const CategoryTable& table);
/// x = -|pred_mean - gt_means[id]| per image; ids missing from gt_means are skipped.
CovarianceRow covariance_mean_diff(const ModalityRun& run, const CategoryTable& table,
                                   const std::map<std::string, double>& gt_means);

struct CovarianceMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<CovarianceCell>> values;

  /// Labels plus nested covariance/correlation arrays; absent cells are null.
  std::string to_json() const;
  /// `modality,<categories...>` with covariances; absent cells are empty.
  std::string to_csv() const;
};

/// Rows ordered RGB, Depth, Blur, Saliency. Throws Error{LabelMismatch} if
/// category labels differ between rows, Error{InvalidParams} on a repeated modality.
CovarianceMatrix assemble_matrix(const std::vector<std::pair<ModalityKind, CovarianceRow>>& rows);

/// Score-bin EMD restricted to records whose indicator for `category` is 1.
/// An empty member set yields an empty list. Throws Error{UnknownCategory},
/// or Error{InvalidParams} for a scored table.
std::vector<ScoreBin> category_score_bins(std::span<const EvalRecord> records, const CategoryTable& table,
                                          const std::string& category, const ScoreBinSpec& spec = {});

}  // namespace aesthetic
