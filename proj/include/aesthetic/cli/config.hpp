#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aesthetic/data.hpp"
#include "aesthetic/metrics.hpp"
#include "aesthetic/modality.hpp"
#include "aesthetic/model.hpp"

namespace aesthetic::cli {

enum class SweepPreset { Grid, Ablation };

/// Grid axes; every combination becomes one sweep cell.
struct SweepAxes {
  std::vector<double> lr_conv;
  std::vector<double> lr_dense;
  std::vector<double> lr_decay;
  std::vector<double> freeze_fraction;
  std::vector<double> h_mu;
  std::vector<double> h_v;
};

/// Every setting a command can read. Relative paths in a config file are
/// resolved against the file's directory; command-line overrides against
/// the working directory.
struct RunConfig {
  // [general]
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  int workers = 1;

  // [data]
  std::filesystem::path votes;
  std::filesystem::path images;
  std::string extension = ".png";
  ModalityKind modality = ModalityKind::RGB;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;

  // [synth]
  int synth_count = 0;
  int synth_size = 32;

  // [modality]
  std::filesystem::path manifest;

  // [model]
  ModelConfig model;

  // [train]
  TrainConfig train;
  std::filesystem::path init_checkpoint;

  // [eval]
  std::filesystem::path checkpoint;
  std::string eval_split = "test";

  // [metrics]
  ReportOptions report;
  ScoreBinSpec score_bins;

  // [analysis]
  std::vector<std::pair<ModalityKind, std::filesystem::path>> runs;
  std::filesystem::path categories;
  CategoryKind category_kind = CategoryKind::Scored;
  std::filesystem::path gt_means;
  std::vector<std::string> category_bins;

  // [sweep]
  SweepPreset sweep_preset = SweepPreset::Grid;
  SweepAxes sweep;

  SplitSpec split_spec() const { return {seed, train_fraction, val_fraction, test_fraction}; }
};

/// Flat `key = value` text under `[section]` headers; `;` starts a comment.
/// Unknown sections or keys, repeated keys and malformed values throw
/// Error{ConfigError}.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in a form `parse_config` accepts.
std::string render_config(const RunConfig& config);

}  // namespace aesthetic::cli
