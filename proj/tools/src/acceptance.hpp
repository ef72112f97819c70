#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace matmuon::cli {

struct CriterionResult {
    int id;
    std::string name;
    bool pass;
    std::string detail;
    double seconds;
};

struct AcceptanceOptions {
    std::filesystem::path scratch_dir; // for the reproducibility criterion's file outputs
    int threads = 1;
};

// Runs the ten acceptance criteria at their stated tolerances. Every
// threshold is fixed here in code; nothing is calibrated at run time.
std::vector<CriterionResult> run_acceptance_suite(const AcceptanceOptions& opts);

// One line per criterion; returns true when everything passed.
bool report_acceptance(const std::vector<CriterionResult>& results, std::ostream& out);

} // namespace matmuon::cli
