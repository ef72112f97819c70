// Acceptance gate: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits nonzero if anything fails.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "acceptance.hpp"

int main() {
    matmuon::cli::AcceptanceOptions opts;
    opts.scratch_dir = std::filesystem::temp_directory_path() / "matmuon_acceptance";
    const unsigned hw = std::thread::hardware_concurrency();
    opts.threads = hw > 0 ? static_cast<int>(hw) : 1;
    if (const char* env = std::getenv("MATMUON_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) opts.threads = v;
    }

    const auto results = matmuon::cli::run_acceptance_suite(opts);
    const bool ok = matmuon::cli::report_acceptance(results, std::cout);
    return ok ? 0 : 1;
}
