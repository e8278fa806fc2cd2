#include "aesthetic/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "aesthetic/error.hpp"

namespace aesthetic {
namespace {

std::mt19937_64 restore_rng(const Checkpoint& ckpt) {
  std::mt19937_64 rng(ckpt.config.seed);
  if (!ckpt.rng_state.empty()) {
    std::istringstream in(ckpt.rng_state);
    in >> rng;
    if (!in) throw Error(ErrorCode::CorruptCheckpoint, "unreadable generator state");
  }
  return rng;
}

std::string store_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

// Per-sample activations kept for the backward pass.
struct Trace {
  std::vector<std::vector<double>> inputs;  // input of layer l
  std::vector<std::vector<double>> pre;     // pre-activation of layer l
  std::vector<std::vector<std::size_t>> pool_arg;
};

std::vector<double> to_chw(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  std::vector<double> out(img.size());
  for (int c = 0; c < ch; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out[(static_cast<std::size_t>(c) * h + y) * w + x] = img.at(x, y, c);
    }
  }
  return out;
}

void check_image(const ModelConfig& cfg, const Image& img) {
  if (img.width() != cfg.input_size || img.height() != cfg.input_size ||
      img.channels() != cfg.input_channels) {
    std::ostringstream msg;
    msg << "model expects " << cfg.input_size << "x" << cfg.input_size << "x" << cfg.input_channels
        << ", got " << img.width() << "x" << img.height() << "x" << img.channels();
    throw Error(ErrorCode::ShapeMismatch, msg.str());
  }
}

std::vector<double> conv_forward(const LayerShape& L, std::span<const double> params,
                                 const std::vector<double>& in) {
  const int s = L.in_size;
  const int r = L.kernel / 2;
  const int k = L.kernel;
  std::vector<double> out(static_cast<std::size_t>(L.out_channels) * s * s);
  const double* w = params.data() + L.weight_offset;
  const double* b = params.data() + L.bias_offset;
  for (int f = 0; f < L.out_channels; ++f) {
    double* o = out.data() + static_cast<std::size_t>(f) * s * s;
    std::fill(o, o + static_cast<std::size_t>(s) * s, b[f]);
    for (int c = 0; c < L.in_channels; ++c) {
      const double* src = in.data() + static_cast<std::size_t>(c) * s * s;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double wv = w[((static_cast<std::size_t>(f) * L.in_channels + c) * k + i) * k + j];
          const int dy = i - r;
          const int dx = j - r;
          const int y_lo = std::max(0, -dy);
          const int y_hi = std::min(s, s - dy);
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(s, s - dx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* srow = src + static_cast<std::size_t>(y + dy) * s + dx;
            double* orow = o + static_cast<std::size_t>(y) * s;
            for (int x = x_lo; x < x_hi; ++x) orow[x] += wv * srow[x];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients (when `grad` is non-null) and returns the
// gradient with respect to the layer input (when `want_input` is set).
std::vector<double> conv_backward(const LayerShape& L, std::span<const double> params,
                                  const std::vector<double>& in, const std::vector<double>& d_pre,
                                  double* grad, bool want_input) {
  const int s = L.in_size;
  const int r = L.kernel / 2;
  const int k = L.kernel;
  std::vector<double> d_in;
  if (want_input) d_in.assign(in.size(), 0.0);
  const double* w = params.data() + L.weight_offset;
  for (int f = 0; f < L.out_channels; ++f) {
    const double* dp = d_pre.data() + static_cast<std::size_t>(f) * s * s;
    if (grad != nullptr) {
      double bias_acc = 0.0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(s) * s; ++i) bias_acc += dp[i];
      grad[L.bias_offset + f] += bias_acc;
    }
    for (int c = 0; c < L.in_channels; ++c) {
      const double* src = in.data() + static_cast<std::size_t>(c) * s * s;
      double* dsrc = want_input ? d_in.data() + static_cast<std::size_t>(c) * s * s : nullptr;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const std::size_t widx = ((static_cast<std::size_t>(f) * L.in_channels + c) * k + i) * k + j;
          const double wv = w[widx];
          const int dy = i - r;
          const int dx = j - r;
          const int y_lo = std::max(0, -dy);
          const int y_hi = std::min(s, s - dy);
          const int x_lo = std::max(0, -dx);
          const int x_hi = std::min(s, s - dx);
          double acc = 0.0;
          for (int y = y_lo; y < y_hi; ++y) {
            const double* srow = src + static_cast<std::size_t>(y + dy) * s + dx;
            const double* drow = dp + static_cast<std::size_t>(y) * s;
            if (grad != nullptr) {
              for (int x = x_lo; x < x_hi; ++x) acc += drow[x] * srow[x];
            }
            if (dsrc != nullptr) {
              double* dsrow = dsrc + static_cast<std::size_t>(y + dy) * s + dx;
              for (int x = x_lo; x < x_hi; ++x) dsrow[x] += wv * drow[x];
            }
          }
          if (grad != nullptr) grad[L.weight_offset + widx] += acc;
        }
      }
    }
  }
  return d_in;
}

std::vector<double> max_pool(const std::vector<double>& act, int channels, int s,
                             std::vector<std::size_t>& arg) {
  const int o = s / 2;
  std::vector<double> out(static_cast<std::size_t>(channels) * o * o);
  arg.assign(out.size(), 0);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < o; ++y) {
      for (int x = 0; x < o; ++x) {
        std::size_t best = (static_cast<std::size_t>(c) * s + 2 * y) * s + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (static_cast<std::size_t>(c) * s + 2 * y + dy) * s + 2 * x + dx;
            if (act[idx] > act[best]) best = idx;
          }
        }
        const std::size_t oi = (static_cast<std::size_t>(c) * o + y) * o + x;
        out[oi] = act[best];
        arg[oi] = best;
      }
    }
  }
  return out;
}

std::vector<double> dense_forward(const LayerShape& L, std::span<const double> params,
                                  const std::vector<double>& in) {
  std::vector<double> out(static_cast<std::size_t>(L.out_channels));
  const double* w = params.data() + L.weight_offset;
  const double* b = params.data() + L.bias_offset;
  for (int o = 0; o < L.out_channels; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * L.in_channels;
    double acc = b[o];
    for (int i = 0; i < L.in_channels; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

BinArray run_forward(const std::vector<LayerShape>& layers, std::span<const double> params,
                     std::vector<double> x, Trace* trace) {
  if (trace != nullptr) {
    trace->inputs.resize(layers.size());
    trace->pre.resize(layers.size());
    trace->pool_arg.resize(layers.size());
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& L = layers[l];
    const bool last = l + 1 == layers.size();
    std::vector<double> pre =
        L.kind == LayerKind::Conv ? conv_forward(L, params, x) : dense_forward(L, params, x);
    std::vector<double> act = pre;
    if (!last) {
      for (double& v : act) v = v > 0.0 ? v : 0.0;
    }
    if (L.kind == LayerKind::Conv && L.pool) {
      std::vector<std::size_t> arg;
      act = max_pool(act, L.out_channels, L.in_size, arg);
      if (trace != nullptr) trace->pool_arg[l] = std::move(arg);
    }
    if (trace != nullptr) {
      trace->inputs[l] = std::move(x);
      trace->pre[l] = std::move(pre);
    }
    x = std::move(act);
  }
  BinArray logits{};
  std::copy(x.begin(), x.end(), logits.begin());
  return logits;
}

void accumulate_sample(const std::vector<LayerShape>& layers, const Checkpoint& ckpt,
                       const Trace& trace, const BinArray& d_logits, std::vector<double>& grad) {
  // Lowest layer that still needs a gradient; nothing below it is visited.
  std::size_t lowest = layers.size();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!ckpt.frozen[l]) {
      lowest = l;
      break;
    }
  }
  if (lowest == layers.size()) return;

  std::vector<double> d_out(d_logits.begin(), d_logits.end());
  for (std::size_t l = layers.size(); l-- > lowest;) {
    const LayerShape& L = layers[l];
    const bool last = l + 1 == layers.size();
    const std::vector<double>& pre = trace.pre[l];
    std::vector<double> d_pre;
    if (L.kind == LayerKind::Conv && L.pool) {
      d_pre.assign(pre.size(), 0.0);
      const auto& arg = trace.pool_arg[l];
      for (std::size_t i = 0; i < arg.size(); ++i) d_pre[arg[i]] += d_out[i];
    } else {
      d_pre = std::move(d_out);
    }
    if (!last) {
      for (std::size_t i = 0; i < d_pre.size(); ++i) {
        if (!(pre[i] > 0.0)) d_pre[i] = 0.0;
      }
    }
    double* g = ckpt.frozen[l] ? nullptr : grad.data();
    const bool want_input = l > lowest;
    const std::vector<double>& in = trace.inputs[l];
    if (L.kind == LayerKind::Conv) {
      d_out = conv_backward(L, ckpt.parameters, in, d_pre, g, want_input);
    } else {
      const double* w = ckpt.parameters.data() + L.weight_offset;
      std::vector<double> d_in;
      if (want_input) d_in.assign(in.size(), 0.0);
      for (int o = 0; o < L.out_channels; ++o) {
        const double dv = d_pre[static_cast<std::size_t>(o)];
        if (g != nullptr) {
          double* grow = g + L.weight_offset + static_cast<std::size_t>(o) * L.in_channels;
          for (int i = 0; i < L.in_channels; ++i) grow[i] += dv * in[static_cast<std::size_t>(i)];
          g[L.bias_offset + o] += dv;
        }
        if (want_input) {
          const double* row = w + static_cast<std::size_t>(o) * L.in_channels;
          for (int i = 0; i < L.in_channels; ++i) d_in[static_cast<std::size_t>(i)] += row[i] * dv;
        }
      }
      d_out = std::move(d_in);
    }
  }
}

void check_grads(const Checkpoint& ckpt, std::span<const double> grads) {
  if (grads.size() != ckpt.parameters.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient length does not match parameter count");
  }
}

void prepare_state(Checkpoint& ckpt, OptimizerKind kind) {
  OptimizerState& st = ckpt.optimizer;
  if (st.kind != kind) {
    st = OptimizerState{};
    st.kind = kind;
    st.first.assign(ckpt.parameters.size(), 0.0);
    if (kind == OptimizerKind::Adam) st.second.assign(ckpt.parameters.size(), 0.0);
  }
  const std::size_t want_second = kind == OptimizerKind::Adam ? ckpt.parameters.size() : 0;
  if (st.first.size() != ckpt.parameters.size() || st.second.size() != want_second) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameter count");
  }
}

}  // namespace

void ModelConfig::validate() const { layer_layout(*this); }

std::vector<LayerShape> layer_layout(const ModelConfig& config) {
  if (config.input_size < 1) throw Error(ErrorCode::InvalidArchitecture, "input size must be >= 1");
  if (config.input_channels != 1 && config.input_channels != 3) {
    throw Error(ErrorCode::InvalidArchitecture, "input channels must be 1 or 3");
  }
  if (config.conv_blocks.empty() || config.dense_widths.empty()) {
    throw Error(ErrorCode::InvalidArchitecture, "need at least one conv block and one dense layer");
  }
  std::vector<LayerShape> layers;
  std::size_t offset = 0;
  int size = config.input_size;
  int channels = config.input_channels;
  for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
    const ConvBlock& b = config.conv_blocks[i];
    if (b.filters < 1 || b.kernel < 1 || b.kernel % 2 == 0) {
      throw Error(ErrorCode::InvalidArchitecture,
                  "conv block " + std::to_string(i + 1) + " needs filters >= 1 and an odd kernel");
    }
    LayerShape L;
    L.kind = LayerKind::Conv;
    L.in_channels = channels;
    L.in_size = size;
    L.out_channels = b.filters;
    L.kernel = b.kernel;
    L.pool = b.pool;
    L.out_size = b.pool ? size / 2 : size;
    if (L.out_size < 1) {
      throw Error(ErrorCode::InvalidArchitecture,
                  "pooling in conv block " + std::to_string(i + 1) + " shrinks below 1x1");
    }
    L.weight_offset = offset;
    L.weight_count = static_cast<std::size_t>(b.filters) * channels * b.kernel * b.kernel;
    L.bias_offset = offset + L.weight_count;
    L.bias_count = static_cast<std::size_t>(b.filters);
    offset = L.end();
    layers.push_back(L);
    size = L.out_size;
    channels = b.filters;
  }
  int features = size * size * channels;
  std::vector<int> widths = config.dense_widths;
  widths.push_back(static_cast<int>(kScoreBins));
  for (int width : widths) {
    if (width < 1) throw Error(ErrorCode::InvalidArchitecture, "dense widths must be >= 1");
    LayerShape L;
    L.kind = LayerKind::Dense;
    L.in_channels = features;
    L.out_channels = width;
    L.weight_offset = offset;
    L.weight_count = static_cast<std::size_t>(features) * width;
    L.bias_offset = offset + L.weight_count;
    L.bias_count = static_cast<std::size_t>(width);
    offset = L.end();
    layers.push_back(L);
    features = width;
  }
  return layers;
}

std::size_t parameter_count(const ModelConfig& config) { return layer_layout(config).back().end(); }

bool Checkpoint::all_frozen() const {
  return std::all_of(frozen.begin(), frozen.end(), [](std::uint8_t f) { return f != 0; });
}

Checkpoint build(const ModelConfig& config) {
  const auto layers = layer_layout(config);
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.parameters.assign(layers.back().end(), 0.0);
  ckpt.frozen.assign(layers.size(), 0);
  std::mt19937_64 rng(config.seed);
  for (const LayerShape& L : layers) {
    const double fan_in = L.kind == LayerKind::Conv
                              ? static_cast<double>(L.in_channels) * L.kernel * L.kernel
                              : static_cast<double>(L.in_channels);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < L.weight_count; ++i) ckpt.parameters[L.weight_offset + i] = dist(rng);
  }
  ckpt.rng_state = store_rng(rng);
  return ckpt;
}

std::vector<BinArray> forward_logits(const Checkpoint& ckpt, std::span<const Image> batch) {
  const auto layers = ckpt.layers();
  std::vector<BinArray> out;
  out.reserve(batch.size());
  for (const Image& img : batch) {
    check_image(ckpt.config, img);
    out.push_back(run_forward(layers, ckpt.parameters, to_chw(img), nullptr));
  }
  return out;
}

std::vector<ScoreDistribution> forward(const Checkpoint& ckpt, std::span<const Image> batch) {
  std::vector<ScoreDistribution> out;
  out.reserve(batch.size());
  for (const BinArray& logits : forward_logits(ckpt, batch)) out.push_back(softmax(logits));
  return out;
}

BackwardResult backward(const Checkpoint& ckpt, std::span<const Image> batch,
                        std::span<const ScoreDistribution> targets, const LossParams& loss) {
  if (batch.empty()) throw Error(ErrorCode::EmptyDataset, "backward needs a non-empty batch");
  if (batch.size() != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch and target counts differ");
  }
  const auto layers = ckpt.layers();
  BackwardResult result;
  result.gradient.assign(ckpt.parameters.size(), 0.0);
  result.sample_emd.reserve(batch.size());
  result.sample_loss.reserve(batch.size());
  const bool frozen_all = ckpt.all_frozen();
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_image(ckpt.config, batch[i]);
    Trace trace;
    const BinArray logits = run_forward(layers, ckpt.parameters, to_chw(batch[i]), frozen_all ? nullptr : &trace);
    const ScoreDistribution pred = softmax(logits);
    result.sample_loss.push_back(combined_loss(targets[i], pred, loss));
    loss_sum += result.sample_loss.back();
    result.sample_emd.push_back(emd(targets[i], pred, 2.0));
    if (!frozen_all) {
      accumulate_sample(layers, ckpt, trace, loss_gradient(targets[i], logits, loss), result.gradient);
    }
  }
  const double n = static_cast<double>(batch.size());
  for (double& g : result.gradient) g /= n;
  result.loss = loss_sum / n;
  return result;
}

Checkpoint freeze(Checkpoint ckpt, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "freeze fraction must lie in [0, 1]");
  }
  const std::size_t count = ckpt.frozen.size();
  // Guard against 0.9 * 10 landing a hair above 9.
  const auto frozen = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
  for (std::size_t l = 0; l < count; ++l) ckpt.frozen[l] = l >= count - std::min(frozen, count) ? 1 : 0;
  return ckpt;
}

void TrainConfig::validate() const {
  if (!(lr_conv >= 0.0) || !(lr_dense >= 0.0) || (lr_conv == 0.0 && lr_dense == 0.0)) {
    throw Error(ErrorCode::InvalidParams, "learning rates must be >= 0 and not both zero");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error(ErrorCode::InvalidParams, "lr_decay must lie in (0, 1]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidParams, "momentum must lie in [0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidParams, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw Error(ErrorCode::InvalidParams, "adam_eps must be > 0");
  if (batch_size < 1) throw Error(ErrorCode::InvalidParams, "batch_size must be >= 1");
  if (epochs < 1) throw Error(ErrorCode::InvalidParams, "epochs must be >= 1");
  if (!(freeze_fraction >= 0.0 && freeze_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "freeze_fraction must lie in [0, 1]");
  }
  if (optimizer == OptimizerKind::None) throw Error(ErrorCode::InvalidParams, "optimizer must be SGD or Adam");
  loss.validate();
}

double TrainConfig::conv_rate(std::uint64_t decay_epoch) const {
  return lr_conv * std::pow(lr_decay, static_cast<double>(decay_epoch));
}

double TrainConfig::dense_rate(std::uint64_t decay_epoch) const {
  return lr_dense * std::pow(lr_decay, static_cast<double>(decay_epoch));
}

void sgd_step(Checkpoint& ckpt, std::span<const double> grads, const TrainConfig& train,
              std::uint64_t decay_epoch) {
  check_grads(ckpt, grads);
  prepare_state(ckpt, OptimizerKind::SGD);
  auto& velocity = ckpt.optimizer.first;
  const auto layers = ckpt.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (ckpt.frozen[l]) continue;
    const double lr = layers[l].kind == LayerKind::Conv ? train.conv_rate(decay_epoch) : train.dense_rate(decay_epoch);
    for (std::size_t i = layers[l].begin(); i < layers[l].end(); ++i) {
      velocity[i] = train.momentum * velocity[i] + grads[i];
      ckpt.parameters[i] -= lr * velocity[i];
    }
  }
  ++ckpt.optimizer.step;
}

void adam_step(Checkpoint& ckpt, std::span<const double> grads, const TrainConfig& train,
               std::uint64_t decay_epoch) {
  check_grads(ckpt, grads);
  prepare_state(ckpt, OptimizerKind::Adam);
  OptimizerState& st = ckpt.optimizer;
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(train.adam_beta1, t);
  const double c2 = 1.0 - std::pow(train.adam_beta2, t);
  const auto layers = ckpt.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (ckpt.frozen[l]) continue;
    const double lr = layers[l].kind == LayerKind::Conv ? train.conv_rate(decay_epoch) : train.dense_rate(decay_epoch);
    for (std::size_t i = layers[l].begin(); i < layers[l].end(); ++i) {
      st.first[i] = train.adam_beta1 * st.first[i] + (1.0 - train.adam_beta1) * grads[i];
      st.second[i] = train.adam_beta2 * st.second[i] + (1.0 - train.adam_beta2) * grads[i] * grads[i];
      const double m_hat = st.first[i] / c1;
      const double v_hat = st.second[i] / c2;
      ckpt.parameters[i] -= lr * m_hat / (std::sqrt(v_hat) + train.adam_eps);
    }
  }
}

double mean_emd(const Checkpoint& ckpt, const LabeledSet& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot evaluate on an empty set");
  const auto preds = forward(ckpt, data.images);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += emd(data.targets[i], preds[i], 2.0);
  return total / static_cast<double>(preds.size());
}

TrainResult train(Checkpoint ckpt, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& cfg, const EpochSink& sink) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (val_set.empty()) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
  if (train_set.images.size() != train_set.targets.size() || val_set.images.size() != val_set.targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "image and target counts differ");
  }

  TrainResult result;
  ckpt = freeze(std::move(ckpt), cfg.freeze_fraction);
  if (ckpt.optimizer.kind != cfg.optimizer) ckpt.optimizer = OptimizerState{};
  std::mt19937_64 rng = restore_rng(ckpt);
  result.initial_val_emd = mean_emd(ckpt, val_set);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<double> sample_emd(n);
  std::vector<double> sample_loss(n);
  std::vector<Image> batch_images;
  std::vector<ScoreDistribution> batch_targets;
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto decay_epoch = static_cast<std::uint64_t>(e);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      batch_images.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_images.push_back(train_set.images[order[i]]);
        batch_targets.push_back(train_set.targets[order[i]]);
      }
      BackwardResult br = backward(ckpt, batch_images, batch_targets, cfg.loss);
      for (std::size_t i = start; i < stop; ++i) {
        sample_emd[order[i]] = br.sample_emd[i - start];
        sample_loss[order[i]] = br.sample_loss[i - start];
      }
      if (cfg.optimizer == OptimizerKind::SGD) {
        sgd_step(ckpt, br.gradient, cfg, decay_epoch);
      } else {
        adam_step(ckpt, br.gradient, cfg, decay_epoch);
      }
    }
    ++ckpt.epoch;

    EpochStats stats;
    stats.epoch = ckpt.epoch;
    // Summed in sample-index order so the value does not depend on the shuffle.
    stats.train_emd = std::accumulate(sample_emd.begin(), sample_emd.end(), 0.0) / static_cast<double>(n);
    stats.val_emd = mean_emd(ckpt, val_set);
    stats.train_loss = std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0) / static_cast<double>(n);
    stats.lr_conv = cfg.conv_rate(decay_epoch);
    stats.lr_dense = cfg.dense_rate(decay_epoch);
    result.history.push_back(stats);
    if (sink) sink(stats);
    if (cfg.target_val_emd && stats.val_emd <= *cfg.target_val_emd) {
      result.stopped_early = e + 1 < cfg.epochs;
      break;
    }
  }
  ckpt.rng_state = store_rng(rng);
  result.checkpoint = std::move(ckpt);
  return result;
}

}  // namespace aesthetic
