#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include "aesthetic/data.hpp"
#include "aesthetic/error.hpp"

using namespace aesthetic;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path / name, std::ios::binary) << content;
    return path / name;
  }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("vote file parsing") {
  TempDir dir("aesthetic_votes");
  const auto path = dir.write("votes.txt", "1 953619 0 1 5 17 38 36 15 6 5 1 1 22 1396\n\n2 953958 10 7 15 26 26 21 10 8 1 2 15 0 1396\n");
  const auto recs = parse_vote_file(path, "/img", ".jpg");
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].index == 1);
  CHECK(recs[0].id == "953619");
  CHECK(recs[0].image_path == fs::path("/img/953619.jpg"));
  CHECK(recs[0].gt_counts[4] == 38);
  CHECK(recs[0].gt[4] == doctest::Approx(38.0 / 124.0).epsilon(1e-15));
  CHECK(recs[0].tags == std::vector<std::int64_t>{1, 22});
  CHECK(recs[0].challenge_id == 1396);
  CHECK(dist_mean(recs[0].gt) == doctest::Approx(5.637096774193548).epsilon(1e-12));
  CHECK(dataset_mean_score(recs) == doctest::Approx(0.5 * (dist_mean(recs[0].gt) + dist_mean(recs[1].gt))));

  const auto short_line = dir.write("short.txt", "1 953619 0 1 5 17 38 36 15 6 5 1 22\n");
  try {
    parse_vote_file(short_line);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  const auto zero = dir.write("zero.txt", "1 a 0 0 0 0 0 0 0 0 0 0 0 0 0\n");
  CHECK(code_of([&] { parse_vote_file(zero); }) == ErrorCode::AllZeroCounts);
  const auto neg = dir.write("neg.txt", "1 a 0 -1 5 0 0 0 0 0 0 0 0 0 0\n");
  CHECK(code_of([&] { parse_vote_file(neg); }) == ErrorCode::ParseError);
  const auto text = dir.write("text.txt", "1 a 0 x 5 0 0 0 0 0 0 0 0 0 0\n");
  CHECK(code_of([&] { parse_vote_file(text); }) == ErrorCode::ParseError);

  CHECK(parse_vote_file(dir.write("empty.txt", "")).empty());
  CHECK(code_of([&] { dataset_mean_score({}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([&] { parse_vote_file(dir.path / "missing.txt"); }) == ErrorCode::IoError);

  write_vote_file(recs, dir.path / "out.txt");
  const auto again = parse_vote_file(dir.path / "out.txt", "/img", ".jpg");
  REQUIRE(again.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(again[i].id == recs[i].id);
    CHECK(again[i].gt_counts == recs[i].gt_counts);
    CHECK(again[i].gt == recs[i].gt);
    CHECK(again[i].tags == recs[i].tags);
    CHECK(again[i].challenge_id == recs[i].challenge_id);
  }
}

TEST_CASE("category tables") {
  TempDir dir("aesthetic_categories");
  const auto scored = dir.write("scored.csv",
                                "\xEF\xBB\xBFid,visual,composition,quality,semantic\r\n"
                                "a,1,2,3,4\r\nb,2.5,1,1,1\r\n");
  const CategoryTable t = parse_category_csv(scored, CategoryKind::Scored);
  CHECK(t.category_names == std::vector<std::string>{"visual", "composition", "quality", "semantic"});
  CHECK(t.rows.at("b")[0] == 2.5);
  CHECK(t.column("quality") == 2u);
  CHECK_FALSE(t.column("lighting").has_value());

  const auto onehot = dir.write("onehot.csv", "id,animals,scenes,human\nx,1,0,0\ny,0,1,1\n");
  const CategoryTable o = parse_category_csv(onehot, CategoryKind::OneHot);
  CHECK(o.kind == CategoryKind::OneHot);
  CHECK(o.rows.size() == 2);

  const auto high = dir.write("high.csv", "id,visual\na,5.0\n");
  CHECK(code_of([&] { parse_category_csv(high, CategoryKind::Scored); }) == ErrorCode::RangeError);
  const auto low = dir.write("low.csv", "id,visual\na,0.5\n");
  CHECK(code_of([&] { parse_category_csv(low, CategoryKind::Scored); }) == ErrorCode::RangeError);
  const auto frac = dir.write("frac.csv", "id,animals\na,0.5\n");
  CHECK(code_of([&] { parse_category_csv(frac, CategoryKind::OneHot); }) == ErrorCode::RangeError);
  const auto none = dir.write("none.csv", "id,animals,scenes\na,0,0\n");
  CHECK(code_of([&] { parse_category_csv(none, CategoryKind::OneHot); }) == ErrorCode::RangeError);
  const auto dup = dir.write("dup.csv", "id,visual\na,1\na,2\n");
  CHECK(code_of([&] { parse_category_csv(dup, CategoryKind::Scored); }) == ErrorCode::DuplicateId);
  const auto ragged = dir.write("ragged.csv", "id,visual,quality\na,1\n");
  CHECK(code_of([&] { parse_category_csv(ragged, CategoryKind::Scored); }) == ErrorCode::ParseError);
  const auto header = dir.write("header.csv", "id,visual,visual\na,1,1\n");
  CHECK(code_of([&] { parse_category_csv(header, CategoryKind::Scored); }) == ErrorCode::ParseError);

  const auto means = dir.write("means.csv", "id,mean\na,5.5\nb,4.25\n");
  const auto m = parse_id_value_csv(means);
  CHECK(m.at("a") == 5.5);
  CHECK(m.at("b") == 4.25);
}

TEST_CASE("synthetic label rule") {
  Image black(16, 16, 3, 0.0);
  Image white(16, 16, 3, 1.0);
  const SynthLabel lb = synth_label(image_statistics(black));
  const SynthLabel lw = synth_label(image_statistics(white));
  CHECK(lb.mean == 1.0);
  CHECK(lb.sigma == 0.5);
  CHECK(lw.mean == doctest::Approx(5.5).epsilon(1e-12));
  CHECK(lw.sigma == 0.5);

  // A half-bright image: contrast = 2 * 0.5, clipped to 1.
  Image half(16, 16, 1, 0.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) half.at(x, y) = 1.0;
  const ImageStatistics s = image_statistics(half);
  CHECK(s.brightness == doctest::Approx(0.5));
  CHECK(s.contrast == doctest::Approx(1.0));
  // Central differences see the step in two columns of 16, magnitude 0.5.
  CHECK(s.edge_density == doctest::Approx(4.0 * (2.0 * 16 * 0.5) / 256.0));

  const BinArray p = discretized_normal(5.5, 1.0);
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p[4] == doctest::Approx(p[5]).epsilon(1e-12));
  const auto votes = votes_from_probs(p, 10000);
  std::int64_t total = 0;
  for (auto v : votes) total += v;
  CHECK(total == 10000);
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::fabs(votes[i] - 10000 * p[i]) < 1.0);
}

TEST_CASE("synthetic dataset") {
  const auto a = synth_dataset(20, 7, 16);
  const auto b = synth_dataset(20, 7, 16);
  const auto c = synth_dataset(5, 7, 16);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].label.gt == b[i].label.gt);
  }
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i].image == a[i].image);
  CHECK(a[0].label.id == "synth000001");
  CHECK(a[0].image.channels() == 3);
  for (double v : a[3].image.pixels()) CHECK(std::fabs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
  CHECK(code_of([] { synth_dataset(0, 1, 16); }) == ErrorCode::InvalidParams);
  CHECK(code_of([] { synth_dataset(3, 1, 3); }) == ErrorCode::InvalidParams);
}

TEST_CASE("synthetic labels follow the label rule on the image") {
  // The vote distribution is a discretized, truncated normal around the rule
  // mean, so its mean matches the mean of that same truncated distribution.
  const auto samples = synth_dataset(1000, 11, 24);
  double worst = 0.0;
  for (const auto& s : samples) {
    const SynthLabel rule = synth_label(image_statistics(s.image));
    worst = std::max(worst, std::fabs(dist_mean(s.label.gt) - rule.mean));
  }
  MESSAGE("max |label mean - rule mean| = " << worst);
  CHECK(worst <= 0.06);
}

TEST_CASE("splits") {
  const SplitSpec spec{3, 0.8, 0.1, 0.1};
  const SplitIndices s = split(10, spec);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 10);
  const SplitIndices again = split(10, spec);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);

  const SplitIndices big = split(1000, {5, 0.7, 0.2, 0.1});
  CHECK(big.val.size() == 200);
  CHECK(big.test.size() == 100);
  CHECK(big.train.size() == 700);
  CHECK(std::is_sorted(big.train.begin(), big.train.end()));

  CHECK(code_of([] { split(0, {}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { split(10, {0, 0.8, 0.1, 0.2}); }) == ErrorCode::InvalidParams);
  CHECK(code_of([] { split(10, {0, 0.0, 0.5, 0.5}); }) == ErrorCode::InvalidParams);
}
