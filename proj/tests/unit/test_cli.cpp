#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "aesthetic/cli/commands.hpp"
#include "aesthetic/cli/config.hpp"
#include "aesthetic/error.hpp"
#include "aesthetic/image.hpp"

using namespace aesthetic;
using namespace aesthetic::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

int invoke(std::vector<std::string> args, std::string* err_text = nullptr) {
  args.insert(args.begin(), "aesthetic");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

ErrorCode config_error_code(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown for: " << text);
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  const RunConfig c = parse_config(
      "[general]\n; comment\nseed = 9\nworkers = 2\n"
      "[model]\ninput_size = 16\nconv = 4:3:pool,6:5\ndense = 8,4\n"
      "[train]\noptimizer = adam\nlr_conv = 0.5\nmean_term = true\nweight_source = prediction\n"
      "target_val_emd = 0.2\n"
      "[analysis]\nruns = rgb=a.csv, saliency=b.csv\ncategory_kind = onehot\n",
      "/base");
  CHECK(c.seed == 9);
  CHECK(c.workers == 2);
  CHECK(c.model.conv_blocks == std::vector<ConvBlock>{{4, 3, true}, {6, 5, false}});
  CHECK(c.model.dense_widths == std::vector<int>{8, 4});
  CHECK(c.train.optimizer == OptimizerKind::Adam);
  CHECK(c.train.lr_conv == 0.5);
  CHECK(c.train.loss.mean_term);
  CHECK(c.train.loss.weight_source == WeightSource::Prediction);
  CHECK(c.train.target_val_emd == 0.2);
  REQUIRE(c.runs.size() == 2);
  CHECK(c.runs[1].first == ModalityKind::Saliency);
  CHECK(c.runs[1].second == fs::path("/base/b.csv"));
  CHECK(c.category_kind == CategoryKind::OneHot);

  CHECK(config_error_code("[general]\nsede = 1\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[bogus]\nx = 1\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("seed = 1\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[general]\nseed = abc\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[general]\nseed = 1\nseed = 2\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[train]\noptimizer = rmsprop\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[data]\nmodality = infrared\n") == ErrorCode::ConfigError);
  CHECK(config_error_code("[model]\nconv = 4:x\n") == ErrorCode::ConfigError);
}

TEST_CASE("rendered config parses back to the same settings") {
  const RunConfig c = parse_config(
      "[general]\nseed = 4\n[data]\nvotes = v.txt\nmodality = blur\n[train]\nlr_decay = 0.9\n"
      "h_mu = 2.5\n[sweep]\npreset = ablation\nlr_conv = 0.1, 0.01\n",
      "/somewhere");
  const std::string text = render_config(c);
  const RunConfig back = parse_config(text);
  CHECK(render_config(back) == text);
  CHECK(back.votes == fs::path("/somewhere/v.txt"));
  CHECK(back.modality == ModalityKind::Blur);
  CHECK(back.train.loss.h_mu == 2.5);
  CHECK(back.sweep_preset == SweepPreset::Ablation);
  CHECK(back.sweep.lr_conv == std::vector<double>{0.1, 0.01});
}

TEST_CASE("cli exit codes") {
  const fs::path dir = fs::temp_directory_path() / "aesthetic_cli_codes";
  fs::remove_all(dir);
  spit(dir / "bad.ini", "[general]\nunknown = 1\n");
  std::string err;
  CHECK(invoke({"--config", (dir / "bad.ini").string(), "train"}, &err) == 2);
  CHECK(err.find("unknown") != std::string::npos);
  spit(dir / "nodata.ini", "[general]\nseed = 1\n");
  CHECK(invoke({"--config", (dir / "nodata.ini").string(), "--out", (dir / "o").string(), "train"}) == 2);
  CHECK(invoke({"frobnicate"}) != 0);
  CHECK(invoke({}) != 0);
  fs::remove_all(dir);
}

TEST_CASE("end-to-end pipeline is deterministic") {
  const fs::path dir = fs::temp_directory_path() / "aesthetic_cli_e2e";
  fs::remove_all(dir);
  const std::string model = "[model]\ninput_size = 16\nconv = 3:3:pool\ndense = 6\n";
  spit(dir / "synth.ini", "[general]\nseed = 5\n[synth]\nn = 30\nsize = 16\n");
  spit(dir / "train.ini", "[general]\nseed = 5\n[data]\nvotes = data/labels.txt\nimages = data/images\n" + model +
                              "[train]\nepochs = 2\nbatch_size = 8\nlr_conv = 0.05\nlr_dense = 0.05\n");
  spit(dir / "eval.ini", "[general]\nseed = 5\n[data]\nvotes = data/labels.txt\nimages = data/images\n" + model +
                             "[eval]\ncheckpoint = train/checkpoint.aesk\nsplit = all\n");
  spit(dir / "cats.csv", "id,animals,scenes\nsynth000001,1,0\nsynth000002,0,1\nsynth000003,1,1\n");
  spit(dir / "analyze.ini",
       "[analysis]\nruns = rgb=eval/records.csv, blur=eval/records.csv\ncategories = cats.csv\n"
       "category_kind = onehot\ncategory_bins = animals\n");
  spit(dir / "sweep.ini", "[general]\nseed = 5\n[data]\nvotes = data/labels.txt\nimages = data/images\n" + model +
                              "[train]\nepochs = 1\nbatch_size = 8\n[sweep]\npreset = ablation\n");

  auto run_all = [&](const std::string& tag) {
    const fs::path out = dir / tag;
    CHECK(invoke({"--config", (dir / "synth.ini").string(), "--out", (dir / "data").string(), "synth"}) == 0);
    CHECK(invoke({"--config", (dir / "train.ini").string(), "--out", (dir / "train").string(), "train"}) == 0);
    CHECK(invoke({"--config", (dir / "eval.ini").string(), "--out", (dir / "eval").string(), "eval"}) == 0);
    CHECK(invoke({"--config", (dir / "analyze.ini").string(), "--out", (out / "analyze").string(), "analyze"}) == 0);
    CHECK(invoke({"--config", (dir / "sweep.ini").string(), "--out", (out / "sweep").string(), "sweep"}) == 0);
    return std::vector<std::string>{slurp(dir / "data/labels.txt"),       slurp(dir / "data/images/synth000007.png"),
                                    slurp(dir / "train/checkpoint.aesk"), slurp(dir / "train/history.csv"),
                                    slurp(dir / "eval/records.csv"),      slurp(dir / "eval/report.json"),
                                    slurp(out / "analyze/preference.csv"), slurp(out / "sweep/leaderboard.csv")};
  };
  const auto first = run_all("a");
  const auto second = run_all("b");
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(!first[i].empty());
    CHECK(first[i] == second[i]);
  }
  const std::string history = slurp(dir / "train/history.csv");
  CHECK(history.rfind("epoch,train_emd,val_emd,lr\n1,", 0) == 0);
  CHECK(fs::exists(dir / "a/analyze/rgb_score_bins.csv"));
  CHECK(fs::exists(dir / "a/analyze/blur_category_animals_score_bins.csv"));
  CHECK(fs::exists(dir / "a/analyze/covariance_emd.json"));
  const std::string board = slurp(dir / "a/sweep/leaderboard.csv");
  CHECK(board.rfind("rank,cell,loss_terms,", 0) == 0);
  CHECK(std::count(board.begin(), board.end(), '\n') == 5);
  CHECK(board.find("emd*dmu*dvar") != std::string::npos);
  CHECK(fs::exists(dir / "train/effective_config.ini"));
  fs::remove_all(dir);
}

TEST_CASE("modality command caches its outputs") {
  const fs::path dir = fs::temp_directory_path() / "aesthetic_cli_modality";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Image img(24, 20, 3, 0.2);
  for (int y = 5; y < 12; ++y)
    for (int x = 6; x < 15; ++x) img.at(x, y, 0) = 0.9;
  write_png(img, dir / "in.png");
  spit(dir / "manifest.txt", "in.png, blur, blur.png\nin.png, saliency, sal.png\n");
  spit(dir / "m.ini", "[modality]\nmanifest = manifest.txt\n");
  const std::vector<std::string> args{"--config", (dir / "m.ini").string(), "--out", (dir / "out").string(),
                                      "modality"};
  REQUIRE(invoke(args) == 0);
  const std::string blur = slurp(dir / "out/blur.png");
  const auto stamp = fs::last_write_time(dir / "out/blur.png");
  CHECK(read_image(dir / "out/sal.png").channels() == 1);
  REQUIRE(invoke(args) == 0);
  CHECK(fs::last_write_time(dir / "out/blur.png") == stamp);
  CHECK(slurp(dir / "out/blur.png") == blur);

  spit(dir / "manifest.txt", "in.png, blur, blur.png\nmissing.png, blur, x.png\n");
  CHECK(invoke(args) == 1);
  CHECK(slurp(dir / "out/blur.png") == blur);
  fs::remove_all(dir);
}
