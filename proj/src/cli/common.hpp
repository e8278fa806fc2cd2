#pragma once

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aesthetic/cli/config.hpp"
#include "aesthetic/data.hpp"
#include "aesthetic/image.hpp"
#include "aesthetic/model.hpp"

namespace aesthetic::cli {

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Calls fn(i) for i in [0, n) on up to `workers` threads. Returns the
/// exception thrown for each index (null where fn succeeded).
std::vector<std::exception_ptr> parallel_for(std::size_t n, int workers,
                                             const std::function<void(std::size_t)>& fn);
std::string describe(const std::exception_ptr& e);

/// Throws Error{ConfigError} naming `key` when `path` is unset or missing.
void require_path(const std::filesystem::path& path, const std::string& key);

/// Channel conversion then resize to the model's square input.
Image fit_input(const Image& img, const ModelConfig& model);

/// Vote-file records and their model-ready images, in file order.
struct Dataset {
  std::vector<LabeledImage> records;
  std::vector<Image> inputs;

  LabeledSet subset(const std::vector<std::size_t>& indices) const;
};

/// Loads [data] votes and images, applies [data] modality and fits every
/// image to `model`. Any unreadable image fails the whole load with a
/// listing of the offending files.
Dataset load_dataset(const RunConfig& config, const ModelConfig& model, std::ostream& log);

std::string history_csv(const std::vector<EpochStats>& history);

}  // namespace aesthetic::cli
