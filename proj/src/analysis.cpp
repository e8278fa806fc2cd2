#include "aesthetic/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "aesthetic/error.hpp"
#include "text_util.hpp"

namespace aesthetic {

int modality_rank(ModalityKind kind) {
  for (int i = 0; i < 4; ++i) {
    if (kModalityOrder[i] == kind) return i;
  }
  return 4;
}

PreferenceResult modality_preference(std::span<const ModalityRun> runs) {
  if (runs.size() < 2) throw Error(ErrorCode::InvalidParams, "modality preference needs at least two runs");

  // Visit runs in tie-break order so the first strict minimum wins ties.
  std::vector<const ModalityRun*> ordered;
  for (const ModalityRun& run : runs) ordered.push_back(&run);
  std::sort(ordered.begin(), ordered.end(), [](const ModalityRun* a, const ModalityRun* b) {
    return modality_rank(a->modality) < modality_rank(b->modality);
  });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->modality == ordered[i - 1]->modality) {
      throw Error(ErrorCode::InvalidParams, "modality " + std::string(to_string(ordered[i]->modality)) +
                                                " appears in more than one run");
    }
  }

  std::vector<std::map<std::string, double>> by_id(ordered.size());
  std::set<std::string> all_ids;
  for (std::size_t r = 0; r < ordered.size(); ++r) {
    for (const EvalRecord& rec : ordered[r]->records) {
      if (!by_id[r].emplace(rec.id, rec.emd2).second) {
        throw Error(ErrorCode::InvalidParams, "id " + rec.id + " repeated in the " +
                                                  std::string(to_string(ordered[r]->modality)) + " run");
      }
      all_ids.insert(rec.id);
    }
  }

  PreferenceResult result;
  for (const std::string& id : all_ids) {
    std::vector<double> scores;
    for (const auto& m : by_id) {
      const auto it = m.find(id);
      if (it == m.end()) break;
      scores.push_back(it->second);
    }
    if (scores.size() != by_id.size()) {
      result.unmatched_ids.push_back(id);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < scores.size(); ++r) {
      if (scores[r] < scores[best]) best = r;
    }
    double second = std::numeric_limits<double>::infinity();
    bool tied = false;
    for (std::size_t r = 0; r < scores.size(); ++r) {
      if (r == best) continue;
      second = std::min(second, scores[r]);
      if (scores[r] == scores[best]) tied = true;
    }
    if (tied) ++result.ties;
    const ModalityKind kind = ordered[best]->modality;
    result.groups[kind].push_back(id);
    result.rows.push_back({id, kind, second - scores[best]});
  }
  if (result.rows.empty()) throw Error(ErrorCode::EmptyIntersection, "runs share no image ids");
  return result;
}

std::string PreferenceResult::to_csv() const {
  std::string out = "image_id,preferred_modality,margin\n";
  for (const PreferenceRow& row : rows) {
    out += row.image_id + ',' + std::string(to_string(row.preferred)) + ',' +
           detail::format_double(row.margin) + '\n';
  }
  return out;
}

CovarianceRow covariance_row(const std::map<std::string, double>& x, const CategoryTable& table) {
  std::vector<double> xs;
  std::vector<const std::vector<double>*> ys;
  for (const auto& [id, value] : x) {
    const auto it = table.rows.find(id);
    if (it == table.rows.end()) continue;
    xs.push_back(value);
    ys.push_back(&it->second);
  }
  if (xs.empty()) throw Error(ErrorCode::EmptyIntersection, "no ids shared with the category table");

  const std::size_t n = xs.size();
  const double mx = [&] {
    double s = 0.0;
    for (double v : xs) s += v;
    return s / static_cast<double>(n);
  }();
  double sxx = 0.0;
  for (double v : xs) sxx += (v - mx) * (v - mx);

  CovarianceRow row;
  row.categories = table.category_names;
  for (std::size_t c = 0; c < table.category_names.size(); ++c) {
    CovarianceCell cell;
    cell.n = n;
    double my = 0.0;
    for (const auto* y : ys) my += (*y)[c];
    my /= static_cast<double>(n);
    double sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dy = (*ys[i])[c] - my;
      sxy += (xs[i] - mx) * dy;
      syy += dy * dy;
    }
    if (n >= 2 && sxx > 0.0 && syy > 0.0) {
      cell.covariance = sxy / static_cast<double>(n - 1);
      cell.correlation = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    }
    row.cells.push_back(cell);
  }
  return row;
}

CovarianceRow covariance_emd(const ModalityRun& run, const CategoryTable& table) {
  std::map<std::string, double> x;
  for (const EvalRecord& r : run.records) x[r.id] = -r.emd2;
  return covariance_row(x, table);
}

CovarianceRow covariance_mean_diff(const ModalityRun& run, const CategoryTable& table,
                                   const std::map<std::string, double>& gt_means) {
  std::map<std::string, double> x;
  for (const EvalRecord& r : run.records) {
    const auto it = gt_means.find(r.id);
    if (it != gt_means.end()) x[r.id] = -std::abs(r.pred_mean - it->second);
  }
  return covariance_row(x, table);
}

CovarianceMatrix assemble_matrix(const std::vector<std::pair<ModalityKind, CovarianceRow>>& rows) {
  CovarianceMatrix m;
  if (rows.empty()) return m;
  std::vector<const std::pair<ModalityKind, CovarianceRow>*> ordered;
  for (const auto& r : rows) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return modality_rank(a->first) < modality_rank(b->first);
  });
  m.col_labels = ordered.front()->second.categories;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& [kind, row] = *ordered[i];
    if (i > 0 && kind == ordered[i - 1]->first) {
      throw Error(ErrorCode::InvalidParams, "modality " + std::string(to_string(kind)) + " has two rows");
    }
    if (row.categories != m.col_labels || row.cells.size() != m.col_labels.size()) {
      throw Error(ErrorCode::LabelMismatch,
                  "category labels of the " + std::string(to_string(kind)) + " row differ from the first row");
    }
    m.row_labels.emplace_back(to_string(kind));
    m.values.push_back(row.cells);
  }
  return m;
}

std::string CovarianceMatrix::to_json() const {
  auto grid = [&](std::optional<double> CovarianceCell::*field) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : values) {
      nlohmann::json r = nlohmann::json::array();
      for (const auto& cell : row) {
        const auto& v = cell.*field;
        r.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      }
      rows.push_back(r);
    }
    return rows;
  };
  nlohmann::ordered_json j;
  j["row_labels"] = row_labels;
  j["col_labels"] = col_labels;
  j["covariance"] = grid(&CovarianceCell::covariance);
  j["correlation"] = grid(&CovarianceCell::correlation);
  return j.dump(2) + "\n";
}

std::string CovarianceMatrix::to_csv() const {
  std::string out = "modality";
  for (const auto& c : col_labels) out += ',' + c;
  out += '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += row_labels[i];
    for (const auto& cell : values[i]) {
      out += ',';
      if (cell.covariance) out += detail::format_double(*cell.covariance);
    }
    out += '\n';
  }
  return out;
}

std::vector<ScoreBin> category_score_bins(std::span<const EvalRecord> records, const CategoryTable& table,
                                          const std::string& category, const ScoreBinSpec& spec) {
  if (table.kind != CategoryKind::OneHot) {
    throw Error(ErrorCode::InvalidParams, "category score bins need a one-hot table");
  }
  const auto col = table.column(category);
  if (!col) throw Error(ErrorCode::UnknownCategory, "no category named '" + category + "'");
  std::vector<EvalRecord> members;
  for (const EvalRecord& r : records) {
    const auto it = table.rows.find(r.id);
    if (it != table.rows.end() && it->second[*col] == 1.0) members.push_back(r);
  }
  if (members.empty()) return {};
  return score_bin_emd(members, spec);
}

}  // namespace aesthetic
