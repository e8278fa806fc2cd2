#include "aesthetic/cli/commands.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aesthetic/analysis.hpp"
#include "aesthetic/error.hpp"
#include "common.hpp"
#include "text_util.hpp"

namespace aesthetic::cli {
namespace {

namespace fs = std::filesystem;

// Bumped whenever a transform changes, so cached outputs are regenerated.
constexpr const char* kTransformVersion = "modality-v1";

fs::path resolve(const fs::path& p, const fs::path& base) {
  return (p.is_relative() ? base / p : p).lexically_normal();
}

Image load_modality_output(const ManifestEntry& e, const fs::path& source, const std::optional<fs::path>& ref) {
  const Image input = read_image(source);
  if (e.modality != ModalityKind::Depth) return apply_modality(e.modality, input);
  if (ref) return validate_depth(input, read_image(*ref));
  return validate_depth(input);
}

void save_image(const Image& img, const fs::path& path) {
  if (path.extension() == ".pfm") {
    write_pfm(img, path);
  } else {
    write_png(img, path);
  }
}

Checkpoint initial_checkpoint(const RunConfig& config) {
  if (!config.init_checkpoint.empty()) {
    require_path(config.init_checkpoint, "train.init_checkpoint");
    return load_checkpoint(config.init_checkpoint);
  }
  ModelConfig model = config.model;
  model.seed = config.seed;
  return build(model);
}

const std::vector<std::size_t>& pick_split(const SplitIndices& s, const std::string& name,
                                           const std::vector<std::size_t>& all) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  return all;
}

std::string loss_terms_label(const LossParams& p) {
  std::string label = "emd";
  if (p.mean_term) label += "*dmu";
  if (p.var_term) label += "*dvar";
  return label;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int cmd_modality(const RunConfig& config, std::ostream& log) {
  require_path(config.manifest, "modality.manifest");
  const fs::path base = fs::absolute(config.manifest).parent_path();
  const auto entries = parse_manifest(config.manifest);
  const fs::path cache_path = config.out / "modality_cache.json";

  nlohmann::json cache = nlohmann::json::object();
  if (fs::exists(cache_path)) {
    try {
      cache = nlohmann::json::parse(read_text(cache_path));
    } catch (const nlohmann::json::exception&) {
      log << "warning: ignoring unreadable cache " << cache_path.string() << "\n";
    }
  }

  struct Outcome {
    bool skipped = false;
    std::string key;
    std::string input_hash;
    std::string output_hash;
  };
  std::vector<Outcome> outcomes(entries.size());
  const auto errors = parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    const fs::path source = resolve(e.source, base);
    std::optional<fs::path> ref;
    if (e.reference) ref = resolve(*e.reference, base);
    const fs::path output = resolve(e.output, config.out);
    Outcome& o = outcomes[i];
    o.key = e.output.lexically_normal().generic_string();

    std::string material = std::string(kTransformVersion) + '\0' + std::string(to_string(e.modality)) + '\0' +
                           output.extension().string() + '\0' + read_text(source);
    if (ref) material += '\0' + read_text(*ref);
    o.input_hash = sha256_hex(material);

    if (cache.contains(o.key) && fs::exists(output)) {
      const auto& c = cache.at(o.key);
      if (c.value("input", "") == o.input_hash && c.value("output", "") == file_sha256(output)) {
        o.skipped = true;
        o.output_hash = c.value("output", "");
        return;
      }
    }
    save_image(load_modality_output(e, source, ref), output);
    o.output_hash = file_sha256(output);
  });

  std::map<std::string, std::pair<int, int>> counts;  // modality -> (written, skipped)
  std::size_t failed = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string name(to_string(entries[i].modality));
    if (errors[i]) {
      ++failed;
      log << "error: " << config.manifest.string() << ":" << entries[i].line << ": " << describe(errors[i]) << "\n";
      continue;
    }
    const Outcome& o = outcomes[i];
    if (o.skipped) {
      ++counts[name].second;
      log << "skip " << o.key << " (up to date)\n";
    } else {
      ++counts[name].first;
    }
    cache[o.key] = {{"input", o.input_hash}, {"output", o.output_hash}};
  }
  fs::create_directories(config.out);
  write_text(cache_path, cache.dump(2) + "\n");
  for (const auto& [name, c] : counts) {
    log << name << ": " << c.first << " written, " << c.second << " skipped\n";
  }
  log << entries.size() - failed << " of " << entries.size() << " entries ok\n";
  return failed == 0 ? 0 : 1;
}

int cmd_synth(const RunConfig& config, std::ostream& log) {
  if (config.synth_count < 1) throw Error(ErrorCode::ConfigError, "synth.n must be >= 1");
  if (config.synth_size < 4) throw Error(ErrorCode::ConfigError, "synth.size must be >= 4");
  const auto samples = synth_dataset(config.synth_count, config.seed, config.synth_size);
  const fs::path image_dir = config.out / "images";
  fs::create_directories(image_dir);
  const auto errors = parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    write_png(samples[i].image, image_dir / (samples[i].label.id + ".png"));
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) throw Error(ErrorCode::IoError, describe(errors[i]));
  }
  std::vector<LabeledImage> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  write_vote_file(labels, config.out / "labels.txt");
  log << "wrote " << samples.size() << " images and labels.txt to " << config.out.string()
      << " (mean score " << detail::format_double(dataset_mean_score(labels)) << ")\n";
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  config.train.validate();
  const auto spec = config.split_spec();
  spec.validate();
  Checkpoint ckpt = initial_checkpoint(config);
  const Dataset ds = load_dataset(config, ckpt.config, log);
  const SplitIndices parts = split(ds.records.size(), spec);
  const LabeledSet train_set = ds.subset(parts.train);
  const LabeledSet val_set = ds.subset(parts.val);
  log << "split: " << parts.train.size() << " train, " << parts.val.size() << " val, " << parts.test.size()
      << " test\n";

  const TrainResult result = train(std::move(ckpt), train_set, val_set, config.train, [&](const EpochStats& e) {
    log << "epoch " << e.epoch << ": train_emd " << detail::format_double(e.train_emd) << ", val_emd "
        << detail::format_double(e.val_emd) << "\n";
  });
  log << "initial val_emd " << detail::format_double(result.initial_val_emd)
      << (result.stopped_early ? " (stopped early at target)" : "") << "\n";
  save_checkpoint(result.checkpoint, config.out / "checkpoint.aesk");
  write_text(config.out / "history.csv", history_csv(result.history));
  return 0;
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
  require_path(config.checkpoint, "eval.checkpoint");
  const auto spec = config.split_spec();
  spec.validate();
  const Checkpoint ckpt = load_checkpoint(config.checkpoint);
  const Dataset ds = load_dataset(config, ckpt.config, log);
  std::vector<std::size_t> all(ds.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const SplitIndices parts = split(ds.records.size(), spec);
  const auto& chosen = pick_split(parts, config.eval_split, all);
  if (chosen.empty()) throw Error(ErrorCode::EmptyInput, "eval split '" + config.eval_split + "' is empty");

  std::vector<EvalRecord> records(chosen.size());
  constexpr std::size_t kBatch = 64;
  const std::size_t batches = (chosen.size() + kBatch - 1) / kBatch;
  const auto errors = parallel_for(batches, config.workers, [&](std::size_t b) {
    const std::size_t lo = b * kBatch;
    const std::size_t hi = std::min(chosen.size(), lo + kBatch);
    std::vector<Image> batch;
    for (std::size_t k = lo; k < hi; ++k) batch.push_back(ds.inputs[chosen[k]]);
    const auto preds = forward(ckpt, batch);
    for (std::size_t k = lo; k < hi; ++k) {
      const LabeledImage& rec = ds.records[chosen[k]];
      records[k] = EvalRecord::from_distributions(rec.id, rec.gt, preds[k - lo]);
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) { return a.id < b.id; });
  write_text(config.out / "records.csv", records_to_csv(records));
  const MetricReport report = make_report(records, config.report);
  write_text(config.out / "report.json", report.to_json());
  write_text(config.out / "report.csv", report.to_csv());
  log << "evaluated " << records.size() << " images: mean_emd " << detail::format_double(report.mean_emd)
      << ", acc_at_5 " << detail::format_double(report.acc_at_5) << "%\n";
  return 0;
}

int cmd_analyze(const RunConfig& config, std::ostream& log) {
  if (config.runs.empty()) throw Error(ErrorCode::ConfigError, "analysis.runs is empty");
  for (const auto& [kind, path] : config.runs) require_path(path, "analysis.runs (" + std::string(to_string(kind)) + ")");
  if (!config.categories.empty()) require_path(config.categories, "analysis.categories");
  if (!config.gt_means.empty()) require_path(config.gt_means, "analysis.gt_means");
  config.score_bins.validate();
  config.report.mean_hist.validate();
  config.report.std_hist.validate();

  int failures = 0;
  auto attempt = [&](const std::string& what, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      ++failures;
      log << "error: " << what << " failed: " << e.what() << "\n";
    }
  };

  std::vector<ModalityRun> runs;
  for (const auto& [kind, path] : config.runs) {
    ModalityRun run{kind, records_from_csv(read_text(path), path.string())};
    runs.push_back(std::move(run));
  }

  nlohmann::ordered_json summary;
  for (const ModalityRun& run : runs) {
    const std::string name(to_string(run.modality));
    attempt("score bins (" + name + ")", [&] {
      write_text(config.out / (name + "_score_bins.csv"), score_bins_to_csv(score_bin_emd(run.records, config.score_bins)));
    });
    attempt("histograms (" + name + ")", [&] {
      std::vector<double> pm, gm, ps, gs;
      for (const EvalRecord& r : run.records) {
        pm.push_back(r.pred_mean);
        gm.push_back(r.gt_mean);
        ps.push_back(r.pred_std);
        gs.push_back(r.gt_std);
      }
      write_text(config.out / (name + "_hist_mean.csv"), histograms_to_csv(pm, gm, config.report.mean_hist));
      write_text(config.out / (name + "_hist_std.csv"), histograms_to_csv(ps, gs, config.report.std_hist));
      summary[name] = {{"histogram_emd_mean", histogram_emd(pm, gm, config.report.mean_hist)},
                       {"histogram_emd_std", histogram_emd(ps, gs, config.report.std_hist)},
                       {"records", run.records.size()}};
    });
  }
  attempt("histogram EMD summary", [&] { write_text(config.out / "histogram_emd.json", summary.dump(2) + "\n"); });

  if (runs.size() >= 2) {
    attempt("modality preference", [&] {
      const PreferenceResult pref = modality_preference(runs);
      write_text(config.out / "preference.csv", pref.to_csv());
      std::ostringstream line;
      for (const auto& [kind, ids] : pref.groups) line << " " << to_string(kind) << "=" << ids.size();
      log << "preference groups:" << line.str() << " (ties " << pref.ties << ", unmatched "
          << pref.unmatched_ids.size() << ")\n";
    });
  }

  if (!config.categories.empty()) {
    std::optional<CategoryTable> table;
    attempt("category table", [&] { table = parse_category_csv(config.categories, config.category_kind); });
    if (table) {
      attempt("covariance (emd)", [&] {
        std::vector<std::pair<ModalityKind, CovarianceRow>> rows;
        for (const ModalityRun& run : runs) rows.emplace_back(run.modality, covariance_emd(run, *table));
        const CovarianceMatrix m = assemble_matrix(rows);
        write_text(config.out / "covariance_emd.json", m.to_json());
        write_text(config.out / "covariance_emd.csv", m.to_csv());
      });
      if (!config.gt_means.empty()) {
        attempt("covariance (mean difference)", [&] {
          const auto means = parse_id_value_csv(config.gt_means);
          std::vector<std::pair<ModalityKind, CovarianceRow>> rows;
          for (const ModalityRun& run : runs) rows.emplace_back(run.modality, covariance_mean_diff(run, *table, means));
          const CovarianceMatrix m = assemble_matrix(rows);
          write_text(config.out / "covariance_mean_diff.json", m.to_json());
          write_text(config.out / "covariance_mean_diff.csv", m.to_csv());
        });
      }
      for (const std::string& category : config.category_bins) {
        for (const ModalityRun& run : runs) {
          const std::string name(to_string(run.modality));
          attempt("category score bins (" + category + ", " + name + ")", [&] {
            const auto bins = category_score_bins(run.records, *table, category, config.score_bins);
            write_text(config.out / (name + "_category_" + category + "_score_bins.csv"), score_bins_to_csv(bins));
          });
        }
      }
    }
  }
  log << "analysis finished with " << failures << " failure(s)\n";
  return failures == 0 ? 0 : 1;
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
  const auto spec = config.split_spec();
  spec.validate();

  struct Cell {
    TrainConfig train;
    std::optional<double> val_emd;
    std::string status = "ok";
  };
  std::vector<Cell> cells;
  if (config.sweep_preset == SweepPreset::Ablation) {
    for (const auto& [mean_term, var_term] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
      Cell cell;
      cell.train = config.train;
      cell.train.loss.mean_term = mean_term;
      cell.train.loss.var_term = var_term;
      cells.push_back(cell);
    }
  } else {
    auto axis = [](const std::vector<double>& v, double fallback) {
      return v.empty() ? std::vector<double>{fallback} : v;
    };
    const TrainConfig& b = config.train;
    for (double lc : axis(config.sweep.lr_conv, b.lr_conv))
      for (double ld : axis(config.sweep.lr_dense, b.lr_dense))
        for (double dc : axis(config.sweep.lr_decay, b.lr_decay))
          for (double ff : axis(config.sweep.freeze_fraction, b.freeze_fraction))
            for (double hm : axis(config.sweep.h_mu, b.loss.h_mu))
              for (double hv : axis(config.sweep.h_v, b.loss.h_v)) {
                Cell cell;
                cell.train = b;
                cell.train.lr_conv = lc;
                cell.train.lr_dense = ld;
                cell.train.lr_decay = dc;
                cell.train.freeze_fraction = ff;
                cell.train.loss.h_mu = hm;
                cell.train.loss.h_v = hv;
                cells.push_back(cell);
              }
  }
  for (const Cell& c : cells) c.train.validate();

  const Checkpoint start = initial_checkpoint(config);
  const Dataset ds = load_dataset(config, start.config, log);
  const SplitIndices parts = split(ds.records.size(), spec);
  const LabeledSet train_set = ds.subset(parts.train);
  const LabeledSet val_set = ds.subset(parts.val);

  for (std::size_t i = 0; i < cells.size(); ++i) {
    try {
      const TrainResult r = train(start, train_set, val_set, cells[i].train);
      cells[i].val_emd = r.history.back().val_emd;
      write_text(config.out / "cells" / ("cell_" + std::to_string(i) + "_history.csv"), history_csv(r.history));
      log << "cell " << i << " (" << loss_terms_label(cells[i].train.loss) << "): val_emd "
          << detail::format_double(*cells[i].val_emd) << "\n";
    } catch (const std::exception& e) {
      cells[i].status = csv_safe(e.what());
      log << "error: cell " << i << " failed: " << e.what() << "\n";
    }
  }

  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& va = cells[a].val_emd;
    const auto& vb = cells[b].val_emd;
    if (va && vb) return *va < *vb;
    return va.has_value() && !vb.has_value();
  });
  std::string csv = "rank,cell,loss_terms,lr_conv,lr_dense,lr_decay,freeze_fraction,h_mu,h_v,val_emd,status\n";
  int failed = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Cell& c = cells[order[rank]];
    const TrainConfig& t = c.train;
    csv += std::to_string(rank + 1) + ',' + std::to_string(order[rank]) + ',' + loss_terms_label(t.loss) + ',' +
           detail::format_double(t.lr_conv) + ',' + detail::format_double(t.lr_dense) + ',' +
           detail::format_double(t.lr_decay) + ',' + detail::format_double(t.freeze_fraction) + ',' +
           detail::format_double(t.loss.h_mu) + ',' + detail::format_double(t.loss.h_v) + ',' +
           (c.val_emd ? detail::format_double(*c.val_emd) : std::string()) + ',' + c.status + '\n';
    if (!c.val_emd) ++failed;
  }
  write_text(config.out / "leaderboard.csv", csv);
  log << cells.size() - static_cast<std::size_t>(failed) << " of " << cells.size() << " cells completed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace aesthetic::cli
