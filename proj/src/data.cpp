#include "aesthetic/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "aesthetic/error.hpp"
#include "text_util.hpp"

namespace aesthetic {
namespace {

[[noreturn]] void fail_line(ErrorCode code, const std::filesystem::path& path, int line,
                            const std::string& reason) {
  throw Error(code, path.string() + ":" + std::to_string(line) + ": " + reason);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<std::string> read_csv_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // Tolerate a UTF-8 byte order mark on the header.
  if (!lines.empty() && lines.front().rfind("\xEF\xBB\xBF", 0) == 0) lines.front().erase(0, 3);
  return lines;
}

}  // namespace

std::vector<LabeledImage> parse_vote_file(const std::filesystem::path& path,
                                          const std::filesystem::path& image_dir,
                                          const std::string& extension) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open vote file " + path.string());
  std::vector<LabeledImage> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 15) {
      fail_line(ErrorCode::ParseError, path, line_no,
                "expected 15 fields (index, id, 10 counts, 2 tags, challenge), got " +
                    std::to_string(tokens.size()));
    }
    std::vector<std::int64_t> ints;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i == 1) continue;
      const auto v = detail::parse_int(tokens[i]);
      if (!v) fail_line(ErrorCode::ParseError, path, line_no, "field " + std::to_string(i + 1) + " is not an integer");
      ints.push_back(*v);
    }
    LabeledImage rec;
    rec.index = ints[0];
    rec.id = tokens[1];
    std::array<double, kScoreBins> counts{};
    for (std::size_t b = 0; b < kScoreBins; ++b) {
      rec.gt_counts[b] = ints[1 + b];
      if (rec.gt_counts[b] < 0) fail_line(ErrorCode::ParseError, path, line_no, "negative vote count");
      counts[b] = static_cast<double>(rec.gt_counts[b]);
    }
    try {
      rec.gt = normalize(counts);
    } catch (const Error& e) {
      fail_line(e.code(), path, line_no, "record " + rec.id + " has no votes");
    }
    rec.tags = {ints[11], ints[12]};
    rec.challenge_id = ints[13];
    if (!image_dir.empty()) rec.image_path = image_dir / (rec.id + extension);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_vote_file(const std::vector<LabeledImage>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write vote file " + path.string());
  for (const LabeledImage& rec : records) {
    out << rec.index << ' ' << rec.id;
    for (std::int64_t c : rec.gt_counts) out << ' ' << c;
    for (std::size_t t = 0; t < 2; ++t) out << ' ' << (t < rec.tags.size() ? rec.tags[t] : 0);
    out << ' ' << rec.challenge_id << '\n';
  }
}

double dataset_mean_score(const std::vector<LabeledImage>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records");
  double total = 0.0;
  for (const LabeledImage& rec : records) total += dist_mean(rec.gt);
  return total / static_cast<double>(records.size());
}

std::optional<std::size_t> CategoryTable::column(const std::string& name) const {
  const auto it = std::find(category_names.begin(), category_names.end(), name);
  if (it == category_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - category_names.begin());
}

CategoryTable parse_category_csv(const std::filesystem::path& path, CategoryKind kind) {
  const auto lines = read_csv_lines(path);
  if (lines.empty() || detail::trim(lines.front()).empty()) {
    throw Error(ErrorCode::ParseError, path.string() + ": missing header row");
  }
  CategoryTable table;
  table.kind = kind;
  const auto header = detail::split_fields(lines.front(), ',');
  if (header.size() < 2) throw Error(ErrorCode::ParseError, path.string() + ": header needs an id column and categories");
  table.category_names.assign(header.begin() + 1, header.end());
  std::set<std::string> seen_names;
  for (const auto& name : table.category_names) {
    if (name.empty() || !seen_names.insert(name).second) {
      throw Error(ErrorCode::ParseError, path.string() + ": empty or repeated category name '" + name + "'");
    }
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    if (detail::trim(lines[i]).empty()) continue;
    const auto fields = detail::split_fields(lines[i], ',');
    if (fields.size() != header.size()) {
      fail_line(ErrorCode::ParseError, path, line_no, "expected " + std::to_string(header.size()) + " fields");
    }
    std::vector<double> values;
    double total = 0.0;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) fail_line(ErrorCode::ParseError, path, line_no, "'" + fields[c] + "' is not a number");
      if (kind == CategoryKind::Scored && !(*v >= 1.0 && *v <= 4.0)) {
        fail_line(ErrorCode::RangeError, path, line_no, "score " + fields[c] + " outside [1, 4]");
      }
      if (kind == CategoryKind::OneHot && *v != 0.0 && *v != 1.0) {
        fail_line(ErrorCode::RangeError, path, line_no, "indicator " + fields[c] + " is not 0 or 1");
      }
      values.push_back(*v);
      total += *v;
    }
    if (kind == CategoryKind::OneHot && total < 1.0) {
      fail_line(ErrorCode::RangeError, path, line_no, "one-hot row has no category set");
    }
    if (!table.rows.emplace(fields[0], std::move(values)).second) {
      fail_line(ErrorCode::DuplicateId, path, line_no, "id " + fields[0] + " appears twice");
    }
  }
  return table;
}

std::map<std::string, double> parse_id_value_csv(const std::filesystem::path& path) {
  const auto lines = read_csv_lines(path);
  std::map<std::string, double> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    if (detail::trim(lines[i]).empty()) continue;
    const auto fields = detail::split_fields(lines[i], ',');
    if (fields.size() != 2) fail_line(ErrorCode::ParseError, path, line_no, "expected 'id,value'");
    const auto v = detail::parse_double(fields[1]);
    if (!v) fail_line(ErrorCode::ParseError, path, line_no, "'" + fields[1] + "' is not a number");
    if (!out.emplace(fields[0], *v).second) {
      fail_line(ErrorCode::DuplicateId, path, line_no, "id " + fields[0] + " appears twice");
    }
  }
  return out;
}

ImageStatistics image_statistics(const Image& img) {
  const Image gray = to_gray(img);
  const int w = gray.width();
  const int h = gray.height();
  const double n = static_cast<double>(w) * h;
  double sum = 0.0;
  for (double v : gray.pixels()) sum += v;
  const double mean = sum / n;
  double var = 0.0;
  double grad = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dev = gray.at(x, y) - mean;
      var += dev * dev;
      const double gx = 0.5 * (gray.clamped(x + 1, y) - gray.clamped(x - 1, y));
      const double gy = 0.5 * (gray.clamped(x, y + 1) - gray.clamped(x, y - 1));
      grad += std::sqrt(gx * gx + gy * gy);
    }
  }
  ImageStatistics s;
  s.brightness = mean;
  s.edge_density = std::clamp(4.0 * grad / n, 0.0, 1.0);
  s.contrast = std::clamp(2.0 * std::sqrt(var / n), 0.0, 1.0);
  return s;
}

SynthLabel synth_label(const ImageStatistics& stats) {
  return {1.0 + 9.0 * (0.5 * stats.brightness + 0.5 * stats.edge_density), 0.5 + stats.contrast};
}

BinArray discretized_normal(double mean, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidParams, "sigma must be positive");
  BinArray p{};
  double total = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    const double s = score_of(i);
    const double lo = std::max(s - 0.5, 0.5);
    const double hi = std::min(s + 0.5, 10.5);
    p[i] = normal_cdf((hi - mean) / sigma) - normal_cdf((lo - mean) / sigma);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

VoteCounts votes_from_probs(const BinArray& probs, std::int64_t total) {
  VoteCounts votes{};
  std::array<double, kScoreBins> remainder{};
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < kScoreBins; ++i) {
    const double exact = probs[i] * static_cast<double>(total);
    votes[i] = static_cast<std::int64_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(votes[i]);
    assigned += votes[i];
  }
  std::array<std::size_t, kScoreBins> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++votes[order[k % kScoreBins]];
  return votes;
}

namespace {

constexpr int kSynthAttempts = 64;
constexpr double kSynthMeanTolerance = 0.05;

double mean_of(const BinArray& p) {
  double m = 0.0;
  for (std::size_t i = 0; i < kScoreBins; ++i) m += score_of(i) * p[i];
  return m;
}

Image draw_synth_image(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto tinted = [&](double level) {
    std::array<double, 3> c{};
    for (double& v : c) v = std::clamp(level + 0.15 * (unit(rng) - 0.5), 0.0, 1.0);
    return c;
  };

  const auto c0 = tinted(unit(rng));
  const auto c1 = tinted(unit(rng));
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);

  struct Shape {
    bool circle;
    double cx, cy, half;
    std::array<double, 3> color;
  };
  std::vector<Shape> shapes;
  const int shape_count = static_cast<int>(unit(rng) * 4.0);
  for (int s = 0; s < shape_count; ++s) {
    Shape sh;
    sh.circle = unit(rng) < 0.5;
    sh.cx = unit(rng) * size;
    sh.cy = unit(rng) * size;
    sh.half = (0.05 + 0.2 * unit(rng)) * size;
    sh.color = tinted(unit(rng));
    shapes.push_back(sh);
  }

  // Texture strength drives the edge statistic independently of brightness.
  const double amplitude = unit(rng) < 0.25 ? 0.0 : 0.3 * unit(rng);
  const double period = 3.0 + 7.0 * unit(rng);
  const double tex_angle = std::numbers::pi * unit(rng);
  const double tx = std::cos(tex_angle);
  const double ty = std::sin(tex_angle);

  Image img(size, size, 3);
  const double extent = std::abs(dx) + std::abs(dy);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size - 0.5;
      const double v = (y + 0.5) / size - 0.5;
      const double t = std::clamp((u * dx + v * dy) / extent + 0.5, 0.0, 1.0);
      std::array<double, 3> px{};
      for (int c = 0; c < 3; ++c) px[static_cast<std::size_t>(c)] = std::lerp(c0[static_cast<std::size_t>(c)], c1[static_cast<std::size_t>(c)], t);
      for (const Shape& sh : shapes) {
        const double ox = x + 0.5 - sh.cx;
        const double oy = y + 0.5 - sh.cy;
        const bool inside = sh.circle ? ox * ox + oy * oy <= sh.half * sh.half
                                      : std::abs(ox) <= sh.half && std::abs(oy) <= sh.half;
        if (inside) px = sh.color;
      }
      const double wave = amplitude * std::sin(2.0 * std::numbers::pi * (x * tx + y * ty) / period);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(px[static_cast<std::size_t>(c)] + wave, 0.0, 1.0);
    }
  }
  return quantize_8bit(img);
}

}  // namespace

std::vector<SynthSample> synth_dataset(int n, std::uint64_t seed, int size) {
  if (n < 1) throw Error(ErrorCode::InvalidParams, "synthetic dataset needs n >= 1");
  if (size < 4) throw Error(ErrorCode::InvalidParams, "synthetic images need size >= 4");
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int idx = 0; idx < n; ++idx) {
    std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(idx) * 0x9E3779B97F4A7C15ULL));
    // Dark, high-contrast draws get labels whose mean is pulled off the rule
    // by truncation at the bottom of the scale; redraw those.
    Image img;
    SynthLabel lab;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < kSynthAttempts && best_gap > kSynthMeanTolerance; ++attempt) {
      Image cand = draw_synth_image(rng, size);
      const SynthLabel cl = synth_label(image_statistics(cand));
      const double gap = std::abs(mean_of(discretized_normal(cl.mean, cl.sigma)) - cl.mean);
      if (gap < best_gap) {
        best_gap = gap;
        img = std::move(cand);
        lab = cl;
      }
    }
    SynthSample sample;
    sample.label.index = idx + 1;
    std::ostringstream id;
    id << "synth" << std::setw(6) << std::setfill('0') << idx + 1;
    sample.label.id = id.str();
    sample.label.gt_counts = votes_from_probs(discretized_normal(lab.mean, lab.sigma));
    std::array<double, kScoreBins> counts{};
    for (std::size_t b = 0; b < kScoreBins; ++b) counts[b] = static_cast<double>(sample.label.gt_counts[b]);
    sample.label.gt = normalize(counts);
    sample.label.tags = {0, 0};
    sample.label.challenge_id = 0;
    sample.image = std::move(img);
    out.push_back(std::move(sample));
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train > 0.0) || !(val >= 0.0) || !(test >= 0.0)) {
    throw Error(ErrorCode::InvalidParams, "split fractions must be non-negative with train > 0");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidParams, "split fractions must sum to 1");
  }
}

SplitIndices split(std::size_t count, const SplitSpec& spec) {
  spec.validate();
  if (count == 0) throw Error(ErrorCode::EmptyInput, "cannot split an empty record list");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto part = [&](double fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(count) * fraction + 1e-9));
  };
  const std::size_t n_val = part(spec.val);
  const std::size_t n_test = std::min(part(spec.test), count - n_val);
  SplitIndices out;
  out.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                  order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace aesthetic
