#pragma once

#include <ostream>

#include "aesthetic/cli/config.hpp"

namespace aesthetic::cli {

// Each command writes its outputs under config.out and progress lines to
// `log`. Return value is the process exit code: 0 only when every requested
// output was written.
int cmd_modality(const RunConfig& config, std::ostream& log);
int cmd_synth(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_analyze(const RunConfig& config, std::ostream& log);
int cmd_sweep(const RunConfig& config, std::ostream& log);

/// Full command-line entry point: parses flags, loads the config, echoes the
/// effective config to the output directory and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aesthetic::cli
