#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aesthetic/distribution.hpp"
#include "aesthetic/image.hpp"

namespace aesthetic {

struct ConvBlock {
  int filters = 8;
  int kernel = 3;
  bool pool = true;

  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

/// Architecture of the distribution predictor: conv blocks (same padding,
/// ReLU, optional 2x2 max pool), ReLU dense layers, then a 10-wide output
/// layer followed by softmax.
struct ModelConfig {
  int input_size = 64;
  int input_channels = 3;
  std::vector<ConvBlock> conv_blocks{{8, 3, true}, {16, 3, true}};
  std::vector<int> dense_widths{32};
  std::uint64_t seed = 0;

  /// Throws Error{InvalidArchitecture}.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class LayerKind : std::uint8_t { Conv, Dense };

/// Shape and parameter placement of one parameterized layer.
struct LayerShape {
  LayerKind kind = LayerKind::Conv;
  int in_channels = 0;   // dense: input features
  int in_size = 1;       // spatial side (1 for dense)
  int out_channels = 0;  // dense: output features
  int kernel = 1;
  bool pool = false;
  int out_size = 1;      // spatial side after pooling
  std::size_t weight_offset = 0;
  std::size_t weight_count = 0;
  std::size_t bias_offset = 0;
  std::size_t bias_count = 0;

  std::size_t begin() const noexcept { return weight_offset; }
  std::size_t end() const noexcept { return bias_offset + bias_count; }
};

/// Layers in forward order. Throws Error{InvalidArchitecture}.
std::vector<LayerShape> layer_layout(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

enum class OptimizerKind : std::uint8_t { None = 0, SGD = 1, Adam = 2 };

/// SGD keeps its velocity in `first`; Adam keeps first/second moments and
/// counts bias-correction steps in `step`.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::None;
  std::uint64_t step = 0;
  std::vector<double> first;
  std::vector<double> second;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<double> parameters;
  std::vector<std::uint8_t> frozen;  // one flag per layer, forward order
  OptimizerState optimizer;
  std::uint64_t epoch = 0;
  std::string rng_state;  // serialized std::mt19937_64

  std::vector<LayerShape> layers() const { return layer_layout(config); }
  bool all_frozen() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// He-uniform weights, zero biases, nothing frozen, epoch 0.
Checkpoint build(const ModelConfig& config);

/// Throws Error{ShapeMismatch} if an image does not match the config.
std::vector<ScoreDistribution> forward(const Checkpoint& ckpt, std::span<const Image> batch);
std::vector<BinArray> forward_logits(const Checkpoint& ckpt, std::span<const Image> batch);

struct BackwardResult {
  std::vector<double> gradient;  // frozen layers are exactly 0
  double loss = 0.0;             // mean combined loss over the batch
  std::vector<double> sample_loss;  // combined loss per sample
  std::vector<double> sample_emd;   // pure EMD (r = 2) per sample
};

BackwardResult backward(const Checkpoint& ckpt, std::span<const Image> batch,
                        std::span<const ScoreDistribution> targets, const LossParams& loss);

/// Marks the ceil(fraction * layers) deepest layers frozen, the rest trainable.
Checkpoint freeze(Checkpoint ckpt, double fraction);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::SGD;
  double lr_conv = 0.01;
  double lr_dense = 0.01;
  double lr_decay = 1.0;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 50;
  int epochs = 1;
  double freeze_fraction = 0.0;
  LossParams loss;
  std::optional<double> target_val_emd;

  /// Throws Error{InvalidParams}.
  void validate() const;
  double conv_rate(std::uint64_t decay_epoch) const;
  double dense_rate(std::uint64_t decay_epoch) const;
};

/// In-place optimizer updates. `decay_epoch` is the exponent of lr_decay.
/// Frozen layers and their optimizer moments are left untouched.
void sgd_step(Checkpoint& ckpt, std::span<const double> grads, const TrainConfig& train,
              std::uint64_t decay_epoch);
void adam_step(Checkpoint& ckpt, std::span<const double> grads, const TrainConfig& train,
               std::uint64_t decay_epoch);

struct LabeledSet {
  std::vector<Image> images;
  std::vector<ScoreDistribution> targets;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
};

struct EpochStats {
  std::uint64_t epoch = 0;  // global counter, continues across stages
  double train_emd = 0.0;
  double val_emd = 0.0;
  double train_loss = 0.0;
  double lr_conv = 0.0;
  double lr_dense = 0.0;
};

using EpochSink = std::function<void(const EpochStats&)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochStats> history;
  double initial_val_emd = 0.0;
  bool stopped_early = false;
};

/// Mean pure EMD of the model's predictions over `data`.
double mean_emd(const Checkpoint& ckpt, const LabeledSet& data);

/// Runs one training stage: applies `train.freeze_fraction`, resets the
/// optimizer state when the optimizer kind changes, then trains for
/// `train.epochs` epochs with a seeded shuffle. Throws Error{EmptyDataset}.
TrainResult train(Checkpoint ckpt, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& train, const EpochSink& sink = {});

/// Binary checkpoint: "AESK", u16 version, u64 payload length, payload,
/// CRC32. All integers and floats little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws Error{CorruptCheckpoint}.
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace aesthetic
