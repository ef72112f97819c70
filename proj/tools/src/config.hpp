#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matmuon/experiments.hpp"

namespace matmuon::cli {

// Raised for any malformed or unknown config content; maps to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class ExperimentType { Train, Stability, Probe, Convergence, Sweep };

struct W0Spec {
    bool random = false;
    std::uint64_t seed = 0;
    double scale = 0.0;
};

// One config file, fully resolved (every omitted optional filled with its
// default). resolved_json() round-trips: parsing its output yields an
// identical config, which is how summaries stay replayable.
struct ExperimentConfig {
    // problem
    problems::ProblemKind kind = problems::ProblemKind::MatrixRegression;
    int m = 2, n = 2;
    double noise_sigma = 0.0;
    std::uint64_t gt_seed = 0;
    double gt_scale = 1.0;
    // data
    std::int64_t n_samples = 2;
    std::uint64_t data_seed = 0;
    // optimizer
    optim::Optimizer optimizer = optim::Optimizer::MiMuon;
    optim::HyperParams hp;
    // run
    std::int64_t steps = 0;
    std::uint64_t index_seed = 0;
    std::vector<std::uint64_t> seeds;
    W0Spec w0;
    // experiment
    ExperimentType type = ExperimentType::Train;
    bool lemma_mode = false;
    bool track_momentum_error = false;
    bool dump_dataset = false;
    std::int64_t replace_index = 0;
    std::uint64_t replacement_seed = 0;
    std::optional<optim::Optimizer> compare_with;
    std::int64_t probe_pairs = 0;
    int probe_m = 2, probe_n = 2;
    std::uint64_t probe_seed = 0;
    double probe_delta_rel = 0.01;
    std::vector<std::int64_t> t_values;
    double eta_c = 1.0;
    std::vector<double> taus;

    nlohmann::json resolved_json() const;

    // The library-level run config for one seed of this campaign.
    experiments::RunConfig run_config(std::uint64_t seed) const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string optimizer_name(optim::Optimizer o);

} // namespace matmuon::cli
