#include "cli.hpp"

#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "commands.hpp"

namespace matmuon::cli {

namespace {

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("MATMUON_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

const std::vector<std::pair<std::string, ExperimentType>> kSubcommands = {
    {"train", ExperimentType::Train},           {"stability", ExperimentType::Stability},
    {"probe", ExperimentType::Probe},           {"convergence", ExperimentType::Convergence},
    {"sweep", ExperimentType::Sweep},
};

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"matmuon - matrix-parameter optimizer experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads_flag = 0;
    bool check = false;

    for (const auto& [name, type] : kSubcommands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config (json)")->required();
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_flag("--check", check, "run the built-in acceptance suite afterwards");
        sub->add_option("--threads", threads_flag,
                        "worker threads (default: MATMUON_THREADS or hardware)");
    }

    try {
        // CLI11 wants argv-style parsing; feed it the reversed vector form.
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    ExperimentType selected = ExperimentType::Train;
    for (const auto& [name, type] : kSubcommands)
        if (app.get_subcommand(name)->parsed()) selected = type;

    CommandContext ctx;
    try {
        ctx.cfg = load_config(config_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (ctx.cfg.type != selected) {
        std::cerr << "error: config experiment.type does not match the subcommand\n";
        return 2;
    }
    ctx.out_dir = out_dir;
    ctx.threads = resolve_threads(threads_flag);

    const int code = run_command(ctx);
    if (code != 0) return code;

    if (check) {
        AcceptanceOptions opts;
        opts.scratch_dir = ctx.out_dir / "check";
        opts.threads = ctx.threads;
        const auto results = run_acceptance_suite(opts);
        if (!report_acceptance(results, std::cout)) return 4;
    }
    return 0;
}

} // namespace matmuon::cli
