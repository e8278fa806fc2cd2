#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "../oracles.hpp"
#include "aesthetic/error.hpp"
#include "aesthetic/model.hpp"

using namespace aesthetic;

namespace {

ModelConfig micro_config(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.input_size = 8;
  cfg.input_channels = 3;
  cfg.conv_blocks = {{2, 3, true}};
  cfg.dense_widths = {4};
  cfg.seed = seed;
  return cfg;
}

std::vector<Image> random_batch(int n, int size, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image img(size, size, channels);
    for (double& v : img.pixels()) v = u(rng);
    out.push_back(img);
  }
  return out;
}

std::vector<ScoreDistribution> random_targets(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ScoreDistribution> out;
  for (int i = 0; i < n; ++i) out.push_back(oracle::random_dist(rng));
  return out;
}

double batch_loss(const Checkpoint& ckpt, const std::vector<Image>& images,
                  const std::vector<ScoreDistribution>& targets, const LossParams& loss) {
  const auto preds = forward(ckpt, images);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += combined_loss(targets[i], preds[i], loss);
  return total / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
  // conv 3->8 (3x3): 216 + 8; conv 8->16: 1152 + 16; 64 -> 32 -> 16 after
  // two pools, so dense 4096->32: 131072 + 32; output 32->10: 320 + 10.
  CHECK(parameter_count(ModelConfig{}) == 224 + 1168 + 131104 + 330);
  CHECK(layer_layout(ModelConfig{}).size() == 4);
  // micro: conv 3->2: 54 + 2; pool 8 -> 4, 32 features; dense 32->4: 132; out 4->10: 50.
  CHECK(parameter_count(micro_config()) == 56 + 132 + 50);
}

TEST_CASE("invalid architectures are rejected") {
  ModelConfig cfg = micro_config();
  cfg.conv_blocks = {{2, 3, true}, {2, 3, true}, {2, 3, true}, {2, 3, true}};
  CHECK_THROWS_AS(build(cfg), Error);
  cfg = micro_config();
  cfg.conv_blocks = {{2, 4, false}};
  CHECK_THROWS_AS(build(cfg), Error);
  cfg = micro_config();
  cfg.dense_widths.clear();
  CHECK_THROWS_AS(build(cfg), Error);
  cfg = micro_config();
  cfg.input_channels = 2;
  CHECK_THROWS_AS(build(cfg), Error);
}

TEST_CASE("build is deterministic in the seed") {
  const Checkpoint a = build(micro_config(3));
  const Checkpoint b = build(micro_config(3));
  const Checkpoint c = build(micro_config(4));
  CHECK(a == b);
  CHECK(a.parameters != c.parameters);
  CHECK(a.epoch == 0);
  for (auto f : a.frozen) CHECK(f == 0);
  // He-uniform bound on the first layer.
  const auto layers = a.layers();
  const double bound = std::sqrt(6.0 / 27.0);
  for (std::size_t i = layers[0].weight_offset; i < layers[0].weight_offset + layers[0].weight_count; ++i) {
    CHECK(std::fabs(a.parameters[i]) <= bound);
  }
}

TEST_CASE("forward produces valid distributions") {
  const Checkpoint ckpt = build(micro_config());
  const auto batch = random_batch(5, 8, 3, 2);
  const auto preds = forward(ckpt, batch);
  REQUIRE(preds.size() == 5);
  for (const auto& p : preds) {
    double s = 0.0;
    for (double v : p.probs()) s += v;
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
  CHECK(forward(ckpt, batch) == preds);

  Checkpoint zero = ckpt;
  std::fill(zero.parameters.begin(), zero.parameters.end(), 0.0);
  for (const auto& p : forward(zero, batch)) {
    for (double v : p.probs()) CHECK(v == doctest::Approx(0.1).epsilon(1e-15));
  }
  const auto wrong = random_batch(1, 9, 3, 2);
  CHECK_THROWS_AS(forward(ckpt, wrong), Error);
  const auto gray = random_batch(1, 8, 1, 2);
  CHECK_THROWS_AS(forward(ckpt, gray), Error);
}

TEST_CASE("backward matches central differences on the micro-model") {
  for (WeightSource ws : {WeightSource::GroundTruth, WeightSource::Prediction}) {
    LossParams loss;
    loss.weight_source = ws;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Checkpoint ckpt = build(micro_config(seed));
      const auto images = random_batch(3, 8, 3, seed + 10);
      const auto targets = random_targets(3, seed + 20);
      const BackwardResult br = backward(ckpt, images, targets, loss);
      CHECK(std::fabs(br.loss - batch_loss(ckpt, images, targets, loss)) < 1e-12);
      const auto f = [&](const std::vector<double>& params) {
        Checkpoint c = ckpt;
        c.parameters = params;
        return batch_loss(c, images, targets, loss);
      };
      const auto fd = oracle::central_difference(f, ckpt.parameters, 1e-6);
      CHECK(oracle::relative_error(br.gradient, fd) < 1e-4);
    }
  }
}

TEST_CASE("frozen layers get exactly zero gradient and duplicates average") {
  Checkpoint ckpt = freeze(build(micro_config()), 1.0);
  const auto images = random_batch(2, 8, 3, 5);
  const auto targets = random_targets(2, 6);
  for (double g : backward(ckpt, images, targets, {}).gradient) CHECK(g == 0.0);

  ckpt = freeze(build(micro_config()), 0.0);
  const std::vector<Image> one{images[0]};
  const std::vector<ScoreDistribution> t1{targets[0]};
  const std::vector<Image> two{images[0], images[0]};
  const std::vector<ScoreDistribution> t2{targets[0], targets[0]};
  const auto g1 = backward(ckpt, one, t1, {}).gradient;
  const auto g2 = backward(ckpt, two, t2, {}).gradient;
  CHECK(oracle::relative_error(g1, g2) < 1e-15);
}

TEST_CASE("freeze marks the deepest layers") {
  ModelConfig cfg;
  cfg.input_size = 16;
  cfg.conv_blocks = {{2, 3, false}, {2, 3, false}, {2, 3, false}, {2, 3, false}, {2, 3, false}};
  cfg.dense_widths = {4, 4, 4, 4};
  const Checkpoint ckpt = build(cfg);
  REQUIRE(ckpt.frozen.size() == 10);
  const Checkpoint f85 = freeze(ckpt, 0.85);
  CHECK(f85.frozen[0] == 0);
  for (std::size_t l = 1; l < 10; ++l) CHECK(f85.frozen[l] == 1);
  const Checkpoint f90 = freeze(ckpt, 0.9);
  CHECK(f90.frozen[0] == 0);
  CHECK(f90.frozen[1] == 1);
  for (auto f : freeze(ckpt, 0.0).frozen) CHECK(f == 0);
  CHECK(freeze(ckpt, 1.0).all_frozen());
  CHECK_THROWS_AS(freeze(ckpt, 1.5), Error);
}

TEST_CASE("sgd step") {
  Checkpoint ckpt = build(micro_config());
  TrainConfig cfg;
  cfg.lr_conv = 0.1;
  cfg.lr_dense = 0.1;
  cfg.momentum = 0.0;
  const Checkpoint before = ckpt;
  std::vector<double> zero(ckpt.parameters.size(), 0.0);
  sgd_step(ckpt, zero, cfg, 0);
  CHECK(ckpt.parameters == before.parameters);

  std::vector<double> unit(ckpt.parameters.size(), 1.0);
  sgd_step(ckpt, unit, cfg, 0);
  for (std::size_t i = 0; i < unit.size(); ++i) CHECK(ckpt.parameters[i] == before.parameters[i] - 0.1);

  // Momentum accumulates velocity v = m v + g.
  Checkpoint m = before;
  cfg.momentum = 0.5;
  sgd_step(m, unit, cfg, 0);
  sgd_step(m, unit, cfg, 0);
  CHECK(m.parameters[0] == doctest::Approx(before.parameters[0] - 0.1 - 0.15).epsilon(1e-14));

  // Learning-rate decay per epoch.
  Checkpoint d = before;
  cfg.momentum = 0.0;
  cfg.lr_decay = 0.5;
  sgd_step(d, unit, cfg, 2);
  CHECK(d.parameters[0] == doctest::Approx(before.parameters[0] - 0.025).epsilon(1e-14));

  Checkpoint frozen = freeze(before, 0.5);
  const Checkpoint fbefore = frozen;
  sgd_step(frozen, unit, cfg, 0);
  const auto layers = frozen.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = layers[l].begin(); i < layers[l].end(); ++i) {
      if (frozen.frozen[l]) CHECK(frozen.parameters[i] == fbefore.parameters[i]);
      else CHECK(frozen.parameters[i] != fbefore.parameters[i]);
    }
  }
}

TEST_CASE("per-group learning rates") {
  Checkpoint ckpt = build(micro_config());
  const Checkpoint before = ckpt;
  TrainConfig cfg;
  cfg.lr_conv = 0.05;
  cfg.lr_dense = 0.0;
  std::vector<double> g(ckpt.parameters.size(), 0.3);
  sgd_step(ckpt, g, cfg, 0);
  for (const LayerShape& L : ckpt.layers()) {
    for (std::size_t i = L.begin(); i < L.end(); ++i) {
      if (L.kind == LayerKind::Dense) CHECK(ckpt.parameters[i] == before.parameters[i]);
      else CHECK(ckpt.parameters[i] != before.parameters[i]);
    }
  }
  Checkpoint a = before;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.lr_conv = 0.0;
  cfg.lr_dense = 0.01;
  adam_step(a, g, cfg, 0);
  for (const LayerShape& L : a.layers()) {
    for (std::size_t i = L.begin(); i < L.end(); ++i) {
      if (L.kind == LayerKind::Conv) CHECK(a.parameters[i] == before.parameters[i]);
      else CHECK(a.parameters[i] != before.parameters[i]);
    }
  }
}

TEST_CASE("adam step") {
  Checkpoint ckpt = build(micro_config());
  const Checkpoint before = ckpt;
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.lr_conv = 0.001;
  cfg.lr_dense = 0.001;
  std::vector<double> zero(ckpt.parameters.size(), 0.0);
  adam_step(ckpt, zero, cfg, 0);
  CHECK(ckpt.parameters == before.parameters);
  CHECK(ckpt.optimizer.kind == OptimizerKind::Adam);
  CHECK(ckpt.optimizer.step == 1);

  // Constant gradient: the step size settles at the learning rate.
  ckpt = before;
  std::vector<double> g(ckpt.parameters.size(), 0.0);
  g[0] = 0.37;
  double last_delta = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const double p = ckpt.parameters[0];
    adam_step(ckpt, g, cfg, 0);
    last_delta = p - ckpt.parameters[0];
  }
  CHECK(std::fabs(last_delta - 0.001) < 0.01 * 0.001);

  Checkpoint frozen = freeze(before, 1.0);
  std::vector<double> ones(before.parameters.size(), 1.0);
  for (int t = 0; t < 5; ++t) adam_step(frozen, ones, cfg, 0);
  CHECK(frozen.parameters == before.parameters);
  for (double m : frozen.optimizer.first) CHECK(m == 0.0);
}

TEST_CASE("training is deterministic and respects full freezing") {
  auto images = random_batch(24, 8, 3, 40);
  auto targets = random_targets(24, 41);
  LabeledSet train_set{{images.begin(), images.begin() + 16}, {targets.begin(), targets.begin() + 16}};
  LabeledSet val_set{{images.begin() + 16, images.end()}, {targets.begin() + 16, targets.end()}};
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.epochs = 3;
  cfg.lr_conv = 0.05;
  cfg.lr_dense = 0.05;
  const TrainResult a = train(build(micro_config()), train_set, val_set, cfg);
  const TrainResult b = train(build(micro_config()), train_set, val_set, cfg);
  CHECK(a.checkpoint == b.checkpoint);
  REQUIRE(a.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.history[i].val_emd == b.history[i].val_emd);
    CHECK(a.history[i].epoch == i + 1);
  }

  // Second stage continues the epoch counter and resets the optimizer kind.
  TrainConfig adam = cfg;
  adam.optimizer = OptimizerKind::Adam;
  adam.lr_conv = adam.lr_dense = 0.001;
  adam.epochs = 2;
  const TrainResult c = train(a.checkpoint, train_set, val_set, adam);
  CHECK(c.history.front().epoch == 4);
  CHECK(c.checkpoint.optimizer.kind == OptimizerKind::Adam);

  TrainConfig frozen = cfg;
  frozen.freeze_fraction = 1.0;
  const Checkpoint start = build(micro_config());
  const TrainResult f = train(start, train_set, val_set, frozen);
  CHECK(f.checkpoint.parameters == start.parameters);
  for (const auto& e : f.history) {
    CHECK(e.train_emd == f.history.front().train_emd);
    CHECK(e.val_emd == f.history.front().val_emd);
    CHECK(e.train_loss == f.history.front().train_loss);
  }

  CHECK_THROWS_AS(train(start, LabeledSet{}, val_set, cfg), Error);
  CHECK_THROWS_AS(train(start, train_set, LabeledSet{}, cfg), Error);

  TrainConfig early = cfg;
  early.epochs = 50;
  early.target_val_emd = 10.0;  // reached after the first epoch
  const TrainResult e = train(start, train_set, val_set, early);
  CHECK(e.history.size() == 1);
  CHECK(e.stopped_early);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr_conv = cfg.lr_dense = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lr_decay = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.freeze_fraction = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("checkpoint round trip and corruption detection") {
  auto images = random_batch(10, 8, 3, 50);
  auto targets = random_targets(10, 51);
  LabeledSet set{images, targets};
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.batch_size = 4;
  cfg.lr_conv = cfg.lr_dense = 0.01;
  cfg.freeze_fraction = 0.4;
  const Checkpoint trained = train(build(micro_config()), set, set, cfg).checkpoint;

  const auto dir = std::filesystem::temp_directory_path() / "aesthetic_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(trained, dir / "a.aesk");
  const Checkpoint loaded = load_checkpoint(dir / "a.aesk");
  CHECK(loaded == trained);
  save_checkpoint(loaded, dir / "b.aesk");
  const auto a = serialize_checkpoint(trained);
  CHECK(a == serialize_checkpoint(loaded));

  // Training resumed from disk matches training resumed in memory.
  TrainConfig more = cfg;
  more.epochs = 2;
  CHECK(train(loaded, set, set, more).checkpoint == train(trained, set, set, more).checkpoint);

  auto expect_corrupt = [](std::vector<std::uint8_t> bytes, const std::string& detail) {
    try {
      deserialize_checkpoint(bytes);
      FAIL("expected CorruptCheckpoint");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CorruptCheckpoint);
      CHECK(std::string(e.what()).find(detail) != std::string::npos);
    }
  };
  expect_corrupt({a.begin(), a.begin() + static_cast<std::ptrdiff_t>(a.size() / 2)}, "");
  expect_corrupt({a.begin(), a.begin() + 6}, "too short");
  auto magic = a;
  magic[0] = 'X';
  expect_corrupt(magic, "magic");
  auto version = a;
  version[4] = 2;
  expect_corrupt(version, "version 2");
  auto flipped = a;
  flipped[a.size() / 2] ^= 0x40;
  expect_corrupt(flipped, "checksum");
  std::filesystem::remove_all(dir);
}
