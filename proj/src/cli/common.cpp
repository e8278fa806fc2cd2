#include "common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "aesthetic/error.hpp"
#include "aesthetic/modality.hpp"
#include "text_util.hpp"

namespace aesthetic::cli {

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::vector<std::exception_ptr> parallel_for(std::size_t n, int workers,
                                             const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  return errors;
}

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

void require_path(const std::filesystem::path& path, const std::string& key) {
  if (path.empty()) throw Error(ErrorCode::ConfigError, key + " is not set");
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::ConfigError, key + " points to a missing path: " + path.string());
  }
}

Image fit_input(const Image& img, const ModelConfig& model) {
  Image out = img;
  if (model.input_channels == 1 && out.channels() == 3) {
    out = to_gray(out);
  } else if (model.input_channels == 3 && out.channels() == 1) {
    Image rgb(out.width(), out.height(), 3);
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = out.at(x, y);
      }
    }
    out = std::move(rgb);
  }
  return resize(out, model.input_size, model.input_size);
}

LabeledSet Dataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledSet set;
  for (std::size_t i : indices) {
    set.images.push_back(inputs[i]);
    set.targets.push_back(records[i].gt);
  }
  return set;
}

Dataset load_dataset(const RunConfig& config, const ModelConfig& model, std::ostream& log) {
  require_path(config.votes, "data.votes");
  require_path(config.images, "data.images");
  Dataset ds;
  ds.records = parse_vote_file(config.votes, config.images, config.extension);
  ds.inputs.resize(ds.records.size());
  const auto errors = parallel_for(ds.records.size(), config.workers, [&](std::size_t i) {
    Image img = read_image(ds.records[i].image_path);
    if (config.modality == ModalityKind::Depth) {
      img = validate_depth(img);
    } else {
      img = apply_modality(config.modality, img);
    }
    ds.inputs[i] = fit_input(img, model);
  });
  std::string listing;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    ++failed;
    listing += "\n  " + ds.records[i].image_path.string() + ": " + describe(errors[i]);
  }
  if (failed > 0) {
    throw Error(ErrorCode::IoError, std::to_string(failed) + " image(s) could not be loaded:" + listing);
  }
  log << "loaded " << ds.records.size() << " images (" << to_string(config.modality) << ")\n";
  return ds;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_emd,val_emd,lr\n";
  for (const EpochStats& e : history) {
    out += std::to_string(e.epoch) + ',' + detail::format_double(e.train_emd) + ',' +
           detail::format_double(e.val_emd) + ',' + detail::format_double(e.lr_dense) + '\n';
  }
  return out;
}

}  // namespace aesthetic::cli
