#include "aesthetic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "aesthetic/error.hpp"
#include "text_util.hpp"

namespace aesthetic {
namespace {

void require_records(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no evaluation records");
}

double percent(std::size_t hits, std::size_t total) {
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

// Index of the left-closed bin [lo + k*w, lo + (k+1)*w) holding v, computed
// against the bin edges themselves so values on an edge never fall short.
std::size_t edge_bin(double v, double lo, double width, std::size_t count) {
  if (!(v > lo)) return 0;
  auto k = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
  if (lo + static_cast<double>(k + 1) * width <= v) ++k;
  if (k > 0 && lo + static_cast<double>(k) * width > v) --k;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(count) - 1));
}

std::vector<double> column(std::span<const EvalRecord> records, double EvalRecord::*field) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records) out.push_back(r.*field);
  return out;
}

}  // namespace

EvalRecord EvalRecord::from_distributions(std::string id, const ScoreDistribution& gt,
                                          const ScoreDistribution& pred) {
  EvalRecord r;
  r.id = std::move(id);
  r.gt_mean = dist_mean(gt);
  r.gt_std = dist_std(gt);
  r.pred_mean = dist_mean(pred);
  r.pred_std = dist_std(pred);
  r.emd2 = emd(gt, pred, 2.0);
  return r;
}

double two_class_accuracy(std::span<const EvalRecord> records, double threshold) {
  require_records(records);
  std::size_t hits = 0;
  for (const EvalRecord& r : records) {
    if ((r.pred_mean > threshold) == (r.gt_mean > threshold)) ++hits;
  }
  return percent(hits, records.size());
}

double baseline_accuracy(std::span<const EvalRecord> records, double threshold) {
  require_records(records);
  const auto good = std::count_if(records.begin(), records.end(),
                                  [&](const EvalRecord& r) { return r.gt_mean > threshold; });
  return percent(static_cast<std::size_t>(good), records.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "correlation inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::EmptyInput, "correlation needs at least two samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::DegenerateVariance, "zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

CorrelationSuite correlation_suite(std::span<const EvalRecord> records) {
  const auto gm = column(records, &EvalRecord::gt_mean);
  const auto pm = column(records, &EvalRecord::pred_mean);
  const auto gs = column(records, &EvalRecord::gt_std);
  const auto ps = column(records, &EvalRecord::pred_std);
  return {pearson(pm, gm), spearman(pm, gm), pearson(ps, gs), spearman(ps, gs)};
}

double mean_emd(std::span<const EvalRecord> records) {
  require_records(records);
  double total = 0.0;
  for (const EvalRecord& r : records) total += r.emd2;
  return total / static_cast<double>(records.size());
}

void HistogramRange::validate() const {
  if (bins < 1) throw Error(ErrorCode::InvalidParams, "histogram needs at least one bin");
  if (!(hi > lo)) throw Error(ErrorCode::InvalidParams, "histogram range must satisfy hi > lo");
}

std::size_t HistogramRange::bin_of(double v) const {
  return edge_bin(v, lo, (hi - lo) / bins, static_cast<std::size_t>(bins));
}

std::vector<std::size_t> make_histogram(std::span<const double> values, const HistogramRange& range) {
  range.validate();
  std::vector<std::size_t> counts(static_cast<std::size_t>(range.bins), 0);
  for (double v : values) ++counts[range.bin_of(v)];
  return counts;
}

double histogram_emd(std::span<const double> pred_values, std::span<const double> gt_values,
                     const HistogramRange& range) {
  const auto hp = make_histogram(pred_values, range);
  const auto hg = make_histogram(gt_values, range);
  double cum = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < hp.size(); ++k) {
    cum += static_cast<double>(hp[k]) - static_cast<double>(hg[k]);
    total += std::abs(cum);
  }
  return total / range.bins;
}

void ScoreBinSpec::validate() const {
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidParams, "score bin width must be positive");
  if (!(hi > lo)) throw Error(ErrorCode::InvalidParams, "score bin range must satisfy hi > lo");
}

std::size_t ScoreBinSpec::bin_count() const {
  return static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / width - 1e-9)));
}

std::vector<ScoreBin> score_bin_emd(std::span<const EvalRecord> records, const ScoreBinSpec& spec) {
  spec.validate();
  const std::size_t n = spec.bin_count();
  std::vector<ScoreBin> bins(n);
  std::vector<double> sums(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    bins[k].lo = spec.lo + static_cast<double>(k) * spec.width;
    bins[k].hi = spec.lo + static_cast<double>(k + 1) * spec.width;
  }
  for (const EvalRecord& r : records) {
    const std::size_t k = edge_bin(r.gt_mean, spec.lo, spec.width, n);
    ++bins[k].count;
    sums[k] += r.emd2;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (bins[k].count > 0) bins[k].mean_emd = sums[k] / static_cast<double>(bins[k].count);
  }
  return bins;
}

namespace {

nlohmann::ordered_json report_json(const MetricReport& m) {
  nlohmann::ordered_json j;
  j["acc_at_5"] = m.acc_at_5;
  j["acc_at_mean"] = m.acc_at_mean;
  j["baseline_at_5"] = m.baseline_at_5;
  j["baseline_at_mean"] = m.baseline_at_mean;
  j["lcc_mean"] = m.lcc_mean;
  j["srcc_mean"] = m.srcc_mean;
  j["lcc_std"] = m.lcc_std;
  j["srcc_std"] = m.srcc_std;
  j["mean_emd"] = m.mean_emd;
  j["histogram_emd_mean"] = m.histogram_emd_mean;
  j["histogram_emd_std"] = m.histogram_emd_std;
  return j;
}

}  // namespace

std::string MetricReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

std::string MetricReport::to_csv() const {
  const auto j = report_json(*this);
  std::string header, row;
  for (const auto& [key, value] : j.items()) {
    if (!header.empty()) {
      header += ',';
      row += ',';
    }
    header += key;
    row += detail::format_double(value.get<double>());
  }
  return header + "\n" + row + "\n";
}

MetricReport make_report(std::span<const EvalRecord> records, const ReportOptions& options) {
  require_records(records);
  MetricReport m;
  m.acc_at_5 = two_class_accuracy(records, options.threshold_good);
  m.acc_at_mean = two_class_accuracy(records, options.threshold_mean);
  m.baseline_at_5 = baseline_accuracy(records, options.threshold_good);
  m.baseline_at_mean = baseline_accuracy(records, options.threshold_mean);
  const CorrelationSuite c = correlation_suite(records);
  m.lcc_mean = c.lcc_mean;
  m.srcc_mean = c.srcc_mean;
  m.lcc_std = c.lcc_std;
  m.srcc_std = c.srcc_std;
  m.mean_emd = mean_emd(records);
  m.histogram_emd_mean = histogram_emd(column(records, &EvalRecord::pred_mean),
                                       column(records, &EvalRecord::gt_mean), options.mean_hist);
  m.histogram_emd_std = histogram_emd(column(records, &EvalRecord::pred_std),
                                      column(records, &EvalRecord::gt_std), options.std_hist);
  return m;
}

std::string records_to_csv(std::span<const EvalRecord> records) {
  std::string out = "id,gt_mean,gt_std,pred_mean,pred_std,emd2\n";
  for (const EvalRecord& r : records) {
    out += r.id;
    for (double v : {r.gt_mean, r.gt_std, r.pred_mean, r.pred_std, r.emd2}) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<EvalRecord> records_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<EvalRecord> out;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line, ',');
    if (!header_seen) {
      header_seen = true;
      const std::vector<std::string> expected{"id", "gt_mean", "gt_std", "pred_mean", "pred_std", "emd2"};
      if (fields != expected) {
        throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": unexpected header");
      }
      continue;
    }
    if (fields.size() != 6) {
      throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": expected 6 fields");
    }
    EvalRecord r;
    r.id = fields[0];
    double* slots[] = {&r.gt_mean, &r.gt_std, &r.pred_mean, &r.pred_std, &r.emd2};
    for (std::size_t i = 0; i < 5; ++i) {
      const auto v = detail::parse_double(fields[i + 1]);
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    source + ":" + std::to_string(line_no) + ": '" + fields[i + 1] + "' is not a number");
      }
      *slots[i] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string score_bins_to_csv(std::span<const ScoreBin> bins) {
  std::string out = "bin_center,mean_emd,count\n";
  for (const ScoreBin& b : bins) {
    out += detail::format_double(b.center()) + ',';
    if (b.mean_emd) out += detail::format_double(*b.mean_emd);
    out += ',' + std::to_string(b.count) + '\n';
  }
  return out;
}

std::string histograms_to_csv(std::span<const double> pred_values, std::span<const double> gt_values,
                              const HistogramRange& range) {
  const auto hp = make_histogram(pred_values, range);
  const auto hg = make_histogram(gt_values, range);
  const double width = (range.hi - range.lo) / range.bins;
  std::string out = "bin_center,pred_count,gt_count\n";
  for (std::size_t k = 0; k < hp.size(); ++k) {
    out += detail::format_double(range.lo + (static_cast<double>(k) + 0.5) * width) + ',' +
           std::to_string(hp[k]) + ',' + std::to_string(hg[k]) + '\n';
  }
  return out;
}

}  // namespace aesthetic
