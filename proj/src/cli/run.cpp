#include <CLI11.hpp>

#include "aesthetic/cli/commands.hpp"
#include "aesthetic/error.hpp"
#include "common.hpp"

namespace aesthetic::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modality-decomposed image aesthetic assessment"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  app.add_option("--config", config_path, "Config file (sectioned key = value)");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Global seed");
  app.add_option("--workers", workers, "Worker threads for per-image work")->check(CLI::PositiveNumber);

  using Command = int (*)(const RunConfig&, std::ostream&);
  const std::pair<const char*, std::pair<Command, const char*>> verbs[] = {
      {"modality", {cmd_modality, "Apply modality transforms listed in a manifest"}},
      {"synth", {cmd_synth, "Generate a labelled synthetic dataset"}},
      {"train", {cmd_train, "Run one training stage"}},
      {"eval", {cmd_eval, "Evaluate a checkpoint on a split"}},
      {"analyze", {cmd_analyze, "Score-bin, histogram, preference and covariance analyses"}},
      {"sweep", {cmd_sweep, "Grid or loss-term ablation sweep"}},
  };
  for (const auto& [name, entry] : verbs) app.add_subcommand(name, entry.second)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (out_dir) config.out = std::filesystem::absolute(*out_dir).lexically_normal();
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;
    if (config.workers < 1) throw Error(ErrorCode::ConfigError, "general.workers must be >= 1");

    for (const auto& [name, entry] : verbs) {
      if (!app.got_subcommand(name)) continue;
      std::filesystem::create_directories(config.out);
      write_text(config.out / "effective_config.ini", render_config(config));
      return entry.first(config, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace aesthetic::cli
