#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "aesthetic/error.hpp"
#include "aesthetic/metrics.hpp"

using namespace aesthetic;

namespace {

EvalRecord rec(std::string id, double gt_mean, double pred_mean, double emd2 = 0.1, double gt_std = 1.0,
               double pred_std = 1.0) {
  return {std::move(id), gt_mean, gt_std, pred_mean, pred_std, emd2};
}

std::vector<EvalRecord> random_records(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> score(1.0, 10.0), spread(0.2, 3.0), e(0.0, 0.5);
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(rec("r" + std::to_string(i), score(rng), score(rng), e(rng), spread(rng), spread(rng)));
  }
  return out;
}

}  // namespace

TEST_CASE("two-class accuracy") {
  const std::vector<EvalRecord> r{rec("a", 6, 6), rec("b", 4, 4), rec("c", 6, 4), rec("d", 4, 4.5)};
  CHECK(two_class_accuracy(r, 5.0) == 75.0);
  CHECK(baseline_accuracy(r, 5.0) == 50.0);
  // Strict comparison: exactly 5 counts as "not good".
  const std::vector<EvalRecord> edge{rec("a", 5.0, 5.0), rec("b", 5.0, 5.0001)};
  CHECK(two_class_accuracy(edge, 5.0) == 50.0);
  CHECK(baseline_accuracy(edge, 5.0) == 0.0);
  CHECK_THROWS_AS(two_class_accuracy(std::vector<EvalRecord>{}, 5.0), Error);
}

TEST_CASE("correlations") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 1, 4, 3, 5};
  CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(spearman(x, y) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(pearson(x, x) == 1.0);
  const std::vector<double> neg{5, 4, 3, 2, 1};
  CHECK(pearson(x, neg) == -1.0);
  CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});

  const std::vector<double> flat{2, 2, 2, 2, 2};
  try {
    pearson(x, flat);
    FAIL("expected DegenerateVariance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateVariance);
  }
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> small(0, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + static_cast<std::size_t>(t % 40);
    std::vector<double> a(n), b(n), ta(n), tb(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = g(rng);
      b[i] = a[i] * 0.3 + g(rng);
      ta[i] = small(rng);  // heavy ties
      tb[i] = small(rng);
    }
    ta[0] = 0;
    ta[1] = 6;
    tb[0] = 0;
    tb[1] = 6;
    CHECK(std::fabs(pearson(a, b) - oracle::pearson(a, b)) < 1e-12);
    CHECK(std::fabs(spearman(a, b) - oracle::spearman(a, b)) < 1e-12);
    CHECK(std::fabs(spearman(ta, tb) - oracle::spearman(ta, tb)) < 1e-12);
    CHECK(average_ranks(ta) == oracle::ranks(ta));
  }
}

TEST_CASE("correlation suite pairs predictions with ground truth") {
  std::mt19937_64 rng(5);
  const auto r = random_records(rng, 50);
  std::vector<double> pm, gm, ps, gs;
  for (const auto& x : r) {
    pm.push_back(x.pred_mean);
    gm.push_back(x.gt_mean);
    ps.push_back(x.pred_std);
    gs.push_back(x.gt_std);
  }
  const CorrelationSuite c = correlation_suite(r);
  CHECK(std::fabs(c.lcc_mean - oracle::pearson(pm, gm)) < 1e-12);
  CHECK(std::fabs(c.srcc_mean - oracle::spearman(pm, gm)) < 1e-12);
  CHECK(std::fabs(c.lcc_std - oracle::pearson(ps, gs)) < 1e-12);
  CHECK(std::fabs(c.srcc_std - oracle::spearman(ps, gs)) < 1e-12);
}

TEST_CASE("histogram EMD") {
  const HistogramRange range = kMeanHistogram;
  // All mass in the first vs the last bin: bins-1 of 100 cumulative gaps.
  const std::vector<double> low{1.0}, high{10.0};
  CHECK(histogram_emd(low, high, range) == doctest::Approx(99.0 / 100.0).epsilon(1e-15));
  CHECK(histogram_emd(low, low, range) == 0.0);
  // Doubling both samples doubles the count-based EMD.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 11.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(40), b(40);
    for (double& v : a) v = u(rng);
    for (double& v : b) v = u(rng);
    const double e = histogram_emd(a, b, range);
    CHECK(std::fabs(e - oracle::histogram_emd(a, b, 100, 1.0, 10.0)) < 1e-12);
    std::vector<double> a2 = a, b2 = b;
    a2.insert(a2.end(), a.begin(), a.end());
    b2.insert(b2.end(), b.begin(), b.end());
    CHECK(histogram_emd(a2, b2, range) == doctest::Approx(2.0 * e).epsilon(1e-14));
    CHECK(histogram_emd(a, b, range) == doctest::Approx(histogram_emd(b, a, range)).epsilon(1e-15));
  }
  for (double v : {-3.0, 0.0, 1.0, 1.09, 1.0899999, 1.09000001, 5.5, 9.99, 10.0, 12.0}) {
    CHECK(range.bin_of(v) == oracle::scan_bin(v, 1.0, 0.09, 100));
  }
  const auto counts = make_histogram(std::vector<double>{1.0, 1.01, 10.0}, range);
  CHECK(counts[0] == 2);
  CHECK(counts[99] == 1);
  CHECK_THROWS_AS((HistogramRange{0, 1, 2}.validate()), Error);
  CHECK_THROWS_AS((HistogramRange{10, 2, 2}.validate()), Error);
}

TEST_CASE("score bins") {
  const ScoreBinSpec spec;
  CHECK(spec.bin_count() == 36);
  const std::vector<EvalRecord> r{rec("a", 1.0, 0, 0.1), rec("b", 1.24, 0, 0.3), rec("c", 1.25, 0, 0.5),
                                  rec("d", 10.0, 0, 0.7), rec("e", 0.5, 0, 0.9)};
  const auto bins = score_bin_emd(r, spec);
  REQUIRE(bins.size() == 36);
  CHECK(bins[0].count == 3);
  CHECK(*bins[0].mean_emd == doctest::Approx((0.1 + 0.3 + 0.9) / 3.0));
  CHECK(bins[1].count == 1);
  CHECK(*bins[1].mean_emd == doctest::Approx(0.5));
  CHECK(bins[35].count == 1);
  CHECK_FALSE(bins[2].mean_emd.has_value());
  CHECK(bins[0].center() == 1.125);
  CHECK(bins[35].hi == 10.0);

  // Invariants: counts partition the records; the weighted mean is mean_emd.
  std::mt19937_64 rng(21);
  const auto many = random_records(rng, 500);
  const auto mb = score_bin_emd(many, spec);
  std::size_t total = 0;
  double weighted = 0.0;
  for (const auto& b : mb) {
    total += b.count;
    if (b.mean_emd) weighted += *b.mean_emd * static_cast<double>(b.count);
  }
  CHECK(total == many.size());
  CHECK(weighted / 500.0 == doctest::Approx(mean_emd(many)).epsilon(1e-12));
  for (const auto& x : many) {
    const std::size_t k = oracle::scan_bin(x.gt_mean, 1.0, 0.25, 36);
    CHECK(x.gt_mean >= mb[k].lo - 1e-12);
  }
  CHECK_THROWS_AS((ScoreBinSpec{0.0, 1, 10}.validate()), Error);
  CHECK_THROWS_AS((ScoreBinSpec{0.25, 10, 1}.validate()), Error);
}

TEST_CASE("report and CSV round trip") {
  std::mt19937_64 rng(3);
  const auto r = random_records(rng, 64);
  const MetricReport m = make_report(r);
  CHECK(m.acc_at_5 == two_class_accuracy(r, 5.0));
  CHECK(m.acc_at_mean == two_class_accuracy(r, kAvaMeanThreshold));
  CHECK(m.mean_emd == mean_emd(r));
  const std::string json = m.to_json();
  CHECK(json.find("\"acc_at_5\"") != std::string::npos);
  CHECK(json.find("\"histogram_emd_std\"") != std::string::npos);
  const std::string csv = m.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  const std::string text = records_to_csv(r);
  const auto back = records_from_csv(text);
  REQUIRE(back.size() == r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(back[i].id == r[i].id);
    CHECK(back[i].gt_mean == r[i].gt_mean);
    CHECK(back[i].pred_std == r[i].pred_std);
    CHECK(back[i].emd2 == r[i].emd2);
  }
  CHECK(records_to_csv(back) == text);
  CHECK_THROWS_AS(records_from_csv("id,gt_mean\n"), Error);
  CHECK_THROWS_AS(records_from_csv("id,gt_mean,gt_std,pred_mean,pred_std,emd2\na,1,2\n"), Error);

  const std::string sb = score_bins_to_csv(score_bin_emd(r));
  CHECK(sb.rfind("bin_center,mean_emd,count\n", 0) == 0);
  const std::string hist = histograms_to_csv(std::vector<double>{1.0}, std::vector<double>{10.0}, kMeanHistogram);
  CHECK(hist.rfind("bin_center,pred_count,gt_count\n1.045,1,0\n", 0) == 0);
  CHECK_THROWS_AS(make_report(std::vector<EvalRecord>{}), Error);
}

TEST_CASE("EvalRecord from distributions") {
  std::mt19937_64 rng(4);
  const auto gt = oracle::random_dist(rng);
  const auto pred = oracle::random_dist(rng);
  const EvalRecord r = EvalRecord::from_distributions("x", gt, pred);
  CHECK(r.gt_mean == dist_mean(gt));
  CHECK(r.pred_std == dist_std(pred));
  CHECK(r.emd2 == emd(gt, pred, 2.0));
}
