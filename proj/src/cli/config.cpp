#include "aesthetic/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <functional>
#include <map>
#include <sstream>

#include "aesthetic/error.hpp"
#include "text_util.hpp"

namespace aesthetic::cli {
namespace {

using detail::format_double;

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw Error(ErrorCode::ConfigError, key + " = '" + value + "': expected " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  const auto d = detail::parse_double(v);
  if (!d) bad_value(key, v, "a number");
  return *d;
}

int to_int(const std::string& key, const std::string& v) {
  const auto i = detail::parse_int(v);
  if (!i || *i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max()) {
    bad_value(key, v, "an integer");
  }
  return static_cast<int>(*i);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc{} || ptr != end) bad_value(key, v, "an unsigned 64-bit integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string s = detail::to_lower(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, v, "true or false");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& f : detail::split_fields(v, ',')) out.push_back(to_double(key, f));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::filesystem::path to_path(const std::string& v, const std::filesystem::path& base) {
  if (v.empty()) return {};
  std::filesystem::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string render_path(const std::filesystem::path& p) {
  if (p.empty()) return "";
  return std::filesystem::absolute(p).lexically_normal().string();
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

std::vector<ConvBlock> to_conv_blocks(const std::string& key, const std::string& v) {
  std::vector<ConvBlock> blocks;
  for (const auto& item : detail::split_fields(v, ',')) {
    const auto parts = detail::split_fields(item, ':');
    if (parts.size() < 2 || parts.size() > 3 || (parts.size() == 3 && parts[2] != "pool")) {
      bad_value(key, v, "blocks like 8:3:pool or 16:3");
    }
    blocks.push_back({to_int(key, parts[0]), to_int(key, parts[1]), parts.size() == 3});
  }
  return blocks;
}

std::string render_conv_blocks(const std::vector<ConvBlock>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    out += (i ? "," : "") + std::to_string(blocks[i].filters) + ":" + std::to_string(blocks[i].kernel) +
           (blocks[i].pool ? ":pool" : "");
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)> parse;
  std::function<std::string(const RunConfig&)> render;
};

// Declared in output order; keys are "section.key".
const std::vector<std::pair<std::string, Field>>& schema() {
  using P = std::filesystem::path;
  static const std::vector<std::pair<std::string, Field>> fields = [] {
    std::vector<std::pair<std::string, Field>> f;
    auto add = [&](std::string key, Field field) { f.emplace_back(std::move(key), std::move(field)); };
    auto real = [&](std::string key, auto member_ptr_fn) {
      add(key, {[key, member_ptr_fn](RunConfig& c, const std::string& v, const P&) {
                  *member_ptr_fn(c) = to_double(key, v);
                },
                [member_ptr_fn](const RunConfig& c) {
                  return format_double(*member_ptr_fn(c));
                }});
    };
    auto integer = [&](std::string key, auto member_ptr_fn) {
      add(key, {[key, member_ptr_fn](RunConfig& c, const std::string& v, const P&) {
                  *member_ptr_fn(c) = to_int(key, v);
                },
                [member_ptr_fn](const RunConfig& c) {
                  return std::to_string(*member_ptr_fn(c));
                }});
    };
    auto path = [&](std::string key, auto member_ptr_fn) {
      add(key, {[member_ptr_fn](RunConfig& c, const std::string& v, const P& base) {
                  *member_ptr_fn(c) = to_path(v, base);
                },
                [member_ptr_fn](const RunConfig& c) {
                  return render_path(*member_ptr_fn(c));
                }});
    };
    auto boolean = [&](std::string key, auto member_ptr_fn) {
      add(key, {[key, member_ptr_fn](RunConfig& c, const std::string& v, const P&) {
                  *member_ptr_fn(c) = to_bool(key, v);
                },
                [member_ptr_fn](const RunConfig& c) {
                  return std::string(*member_ptr_fn(c) ? "true" : "false");
                }});
    };
    auto reals = [&](std::string key, auto member_ptr_fn) {
      add(key, {[key, member_ptr_fn](RunConfig& c, const std::string& v, const P&) {
                  *member_ptr_fn(c) = to_doubles(key, v);
                },
                [member_ptr_fn](const RunConfig& c) {
                  return join_doubles(*member_ptr_fn(c));
                }});
    };

    add("general.seed", {[](RunConfig& c, const std::string& v, const P&) { c.seed = to_u64("general.seed", v); },
                         [](const RunConfig& c) { return std::to_string(c.seed); }});
    path("general.out", [](auto& c) { return &c.out; });
    integer("general.workers", [](auto& c) { return &c.workers; });

    path("data.votes", [](auto& c) { return &c.votes; });
    path("data.images", [](auto& c) { return &c.images; });
    add("data.extension", {[](RunConfig& c, const std::string& v, const P&) { c.extension = v; },
                           [](const RunConfig& c) { return c.extension; }});
    add("data.modality",
        {[](RunConfig& c, const std::string& v, const P&) {
           try {
             c.modality = parse_modality(v);
           } catch (const Error&) {
             bad_value("data.modality", v, "rgb, blur, saliency or depth");
           }
         },
         [](const RunConfig& c) { return std::string(to_string(c.modality)); }});
    real("data.train", [](auto& c) { return &c.train_fraction; });
    real("data.val", [](auto& c) { return &c.val_fraction; });
    real("data.test", [](auto& c) { return &c.test_fraction; });

    integer("synth.n", [](auto& c) { return &c.synth_count; });
    integer("synth.size", [](auto& c) { return &c.synth_size; });

    path("modality.manifest", [](auto& c) { return &c.manifest; });

    integer("model.input_size", [](auto& c) { return &c.model.input_size; });
    integer("model.input_channels", [](auto& c) { return &c.model.input_channels; });
    add("model.conv", {[](RunConfig& c, const std::string& v, const P&) {
                         c.model.conv_blocks = to_conv_blocks("model.conv", v);
                       },
                       [](const RunConfig& c) { return render_conv_blocks(c.model.conv_blocks); }});
    add("model.dense", {[](RunConfig& c, const std::string& v, const P&) {
                          c.model.dense_widths.clear();
                          for (const auto& w : detail::split_fields(v, ',')) {
                            c.model.dense_widths.push_back(to_int("model.dense", w));
                          }
                        },
                        [](const RunConfig& c) {
                          std::string out;
                          for (std::size_t i = 0; i < c.model.dense_widths.size(); ++i) {
                            out += (i ? "," : "") + std::to_string(c.model.dense_widths[i]);
                          }
                          return out;
                        }});

    add("train.optimizer", {[](RunConfig& c, const std::string& v, const P&) {
                              const std::string s = detail::to_lower(v);
                              if (s == "sgd") c.train.optimizer = OptimizerKind::SGD;
                              else if (s == "adam") c.train.optimizer = OptimizerKind::Adam;
                              else bad_value("train.optimizer", v, "sgd or adam");
                            },
                            [](const RunConfig& c) { return optimizer_name(c.train.optimizer); }});
    real("train.lr_conv", [](auto& c) { return &c.train.lr_conv; });
    real("train.lr_dense", [](auto& c) { return &c.train.lr_dense; });
    real("train.lr_decay", [](auto& c) { return &c.train.lr_decay; });
    real("train.momentum", [](auto& c) { return &c.train.momentum; });
    real("train.adam_beta1", [](auto& c) { return &c.train.adam_beta1; });
    real("train.adam_beta2", [](auto& c) { return &c.train.adam_beta2; });
    real("train.adam_eps", [](auto& c) { return &c.train.adam_eps; });
    integer("train.batch_size", [](auto& c) { return &c.train.batch_size; });
    integer("train.epochs", [](auto& c) { return &c.train.epochs; });
    real("train.freeze_fraction", [](auto& c) { return &c.train.freeze_fraction; });
    real("train.h_mu", [](auto& c) { return &c.train.loss.h_mu; });
    real("train.h_v", [](auto& c) { return &c.train.loss.h_v; });
    boolean("train.mean_term", [](auto& c) { return &c.train.loss.mean_term; });
    boolean("train.var_term", [](auto& c) { return &c.train.loss.var_term; });
    real("train.dataset_mean", [](auto& c) { return &c.train.loss.dataset_mean; });
    real("train.dataset_var", [](auto& c) { return &c.train.loss.dataset_var; });
    add("train.weight_source",
        {[](RunConfig& c, const std::string& v, const P&) {
           const std::string s = detail::to_lower(v);
           if (s == "ground_truth") c.train.loss.weight_source = WeightSource::GroundTruth;
           else if (s == "prediction") c.train.loss.weight_source = WeightSource::Prediction;
           else bad_value("train.weight_source", v, "ground_truth or prediction");
         },
         [](const RunConfig& c) {
           return std::string(c.train.loss.weight_source == WeightSource::Prediction ? "prediction"
                                                                                      : "ground_truth");
         }});
    add("train.target_val_emd",
        {[](RunConfig& c, const std::string& v, const P&) {
           if (v.empty()) c.train.target_val_emd.reset();
           else c.train.target_val_emd = to_double("train.target_val_emd", v);
         },
         [](const RunConfig& c) {
           return c.train.target_val_emd ? format_double(*c.train.target_val_emd) : std::string();
         }});
    path("train.init_checkpoint", [](auto& c) { return &c.init_checkpoint; });

    path("eval.checkpoint", [](auto& c) { return &c.checkpoint; });
    add("eval.split", {[](RunConfig& c, const std::string& v, const P&) {
                         const std::string s = detail::to_lower(v);
                         if (s != "train" && s != "val" && s != "test" && s != "all") {
                           bad_value("eval.split", v, "train, val, test or all");
                         }
                         c.eval_split = s;
                       },
                       [](const RunConfig& c) { return c.eval_split; }});

    real("metrics.threshold_good", [](auto& c) { return &c.report.threshold_good; });
    real("metrics.threshold_mean", [](auto& c) { return &c.report.threshold_mean; });
    integer("metrics.mean_bins", [](auto& c) { return &c.report.mean_hist.bins; });
    real("metrics.mean_lo", [](auto& c) { return &c.report.mean_hist.lo; });
    real("metrics.mean_hi", [](auto& c) { return &c.report.mean_hist.hi; });
    integer("metrics.std_bins", [](auto& c) { return &c.report.std_hist.bins; });
    real("metrics.std_lo", [](auto& c) { return &c.report.std_hist.lo; });
    real("metrics.std_hi", [](auto& c) { return &c.report.std_hist.hi; });
    real("metrics.score_bin_width", [](auto& c) { return &c.score_bins.width; });
    real("metrics.score_bin_lo", [](auto& c) { return &c.score_bins.lo; });
    real("metrics.score_bin_hi", [](auto& c) { return &c.score_bins.hi; });

    add("analysis.runs",
        {[](RunConfig& c, const std::string& v, const P& base) {
           c.runs.clear();
           for (const auto& item : detail::split_fields(v, ',')) {
             const auto eq = item.find('=');
             if (eq == std::string::npos) bad_value("analysis.runs", v, "entries like rgb=path/records.csv");
             ModalityKind kind{};
             try {
               kind = parse_modality(detail::trim(item.substr(0, eq)));
             } catch (const Error&) {
               bad_value("analysis.runs", v, "modality names rgb, blur, saliency or depth");
             }
             c.runs.emplace_back(kind, to_path(detail::trim(item.substr(eq + 1)), base));
           }
         },
         [](const RunConfig& c) {
           std::string out;
           for (std::size_t i = 0; i < c.runs.size(); ++i) {
             out += (i ? "," : "") + std::string(to_string(c.runs[i].first)) + "=" + render_path(c.runs[i].second);
           }
           return out;
         }});
    path("analysis.categories", [](auto& c) { return &c.categories; });
    add("analysis.category_kind",
        {[](RunConfig& c, const std::string& v, const P&) {
           const std::string s = detail::to_lower(v);
           if (s == "scored") c.category_kind = CategoryKind::Scored;
           else if (s == "onehot") c.category_kind = CategoryKind::OneHot;
           else bad_value("analysis.category_kind", v, "scored or onehot");
         },
         [](const RunConfig& c) {
           return std::string(c.category_kind == CategoryKind::OneHot ? "onehot" : "scored");
         }});
    path("analysis.gt_means", [](auto& c) { return &c.gt_means; });
    add("analysis.category_bins", {[](RunConfig& c, const std::string& v, const P&) {
                                     c.category_bins = detail::split_fields(v, ',');
                                   },
                                   [](const RunConfig& c) {
                                     std::string out;
                                     for (std::size_t i = 0; i < c.category_bins.size(); ++i) {
                                       out += (i ? "," : "") + c.category_bins[i];
                                     }
                                     return out;
                                   }});

    add("sweep.preset", {[](RunConfig& c, const std::string& v, const P&) {
                           const std::string s = detail::to_lower(v);
                           if (s == "grid") c.sweep_preset = SweepPreset::Grid;
                           else if (s == "ablation") c.sweep_preset = SweepPreset::Ablation;
                           else bad_value("sweep.preset", v, "grid or ablation");
                         },
                         [](const RunConfig& c) {
                           return std::string(c.sweep_preset == SweepPreset::Ablation ? "ablation" : "grid");
                         }});
    reals("sweep.lr_conv", [](auto& c) { return &c.sweep.lr_conv; });
    reals("sweep.lr_dense", [](auto& c) { return &c.sweep.lr_dense; });
    reals("sweep.lr_decay", [](auto& c) { return &c.sweep.lr_decay; });
    reals("sweep.freeze_fraction", [](auto& c) { return &c.sweep.freeze_fraction; });
    reals("sweep.h_mu", [](auto& c) { return &c.sweep.h_mu; });
    reals("sweep.h_v", [](auto& c) { return &c.sweep.h_v; });
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, field] : schema()) {
    if (name == key) return &field;
  }
  return nullptr;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw Error(ErrorCode::ConfigError, "key '" + section + "' must sit inside a [section]");
    }
    const bool known = std::any_of(schema().begin(), schema().end(),
                                   [&](const auto& f) { return f.first.starts_with(section + "."); });
    if (!known) throw Error(ErrorCode::ConfigError, "unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const Field* field = find_field(full);
      if (!field) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in [" + section + "]");
      field->parse(config, detail::trim(value.get_value<std::string>()), base_dir);
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::filesystem::absolute(path).parent_path());
}

std::string render_config(const RunConfig& config) {
  std::string out;
  std::string current;
  for (const auto& [name, field] : schema()) {
    const auto dot = name.find('.');
    const std::string section = name.substr(0, dot);
    if (section != current) {
      out += (current.empty() ? "" : "\n") + std::string("[") + section + "]\n";
      current = section;
    }
    out += name.substr(dot + 1) + " = " + field.render(config) + "\n";
  }
  return out;
}

}  // namespace aesthetic::cli
