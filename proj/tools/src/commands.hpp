#pragma once

#include <filesystem>
#include <functional>

#include "config.hpp"

namespace matmuon::cli {

struct CommandContext {
    ExperimentConfig cfg;
    std::filesystem::path out_dir;
    int threads = 1;
};

// Executes the configured experiment and writes its CSV traces plus
// summary.json (which embeds the resolved config). Exceptions escape;
// run_command maps them to exit codes.
void cmd_train(const CommandContext& ctx);
void cmd_stability(const CommandContext& ctx);
void cmd_probe(const CommandContext& ctx);
void cmd_convergence(const CommandContext& ctx);
void cmd_sweep(const CommandContext& ctx);

// Dispatches on cfg.type and maps errors to the exit-code contract:
// 0 ok, 2 config/experiment setup error, 3 numeric divergence.
int run_command(const CommandContext& ctx);

// Runs fn(0..jobs-1), possibly across threads; rethrows the first worker
// exception. Job outputs must go to preassigned slots so results do not
// depend on scheduling.
void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn);

} // namespace matmuon::cli
