#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "matmuon/optim.hpp"
#include "matmuon/problems.hpp"

namespace matmuon::experiments {

struct RunConfig {
    problems::ProblemSpec problem;
    std::int64_t n_samples = 2;
    std::int64_t steps = 0;
    optim::Optimizer optimizer = optim::Optimizer::MiMuon;
    optim::HyperParams hp;
    Matrix w0;
    std::uint64_t data_seed = 0;
    std::uint64_t index_seed = 0;
    bool lemma_mode = false;           // verify the iterate-bound preconditions
    bool track_momentum_error = false; // record ||gradF_S(W_t) - M_{t+1}|| (costs one extra draw)
};

// Offsets every stream seed; how multi-seed campaigns derive their runs.
RunConfig with_seed_offset(RunConfig cfg, std::uint64_t offset);

// Per-step records, all of length steps+1 with index t (t = 0 is the
// initial point: zero momentum, infinite gap, branch -1).
struct ConvergenceTrace {
    std::vector<double> loss;      // F_S(W_t)
    std::vector<double> grad_norm; // ||gradF_S(W_t)||_F
    std::vector<double> mom_norm;  // ||M_t||_F
    std::vector<double> kappa;     // measured singular gap of M_t
    std::vector<double> w_norm;    // ||W_t||_F
    std::vector<double> step_norm; // ||W_t - W_{t-1}||_F
    std::vector<int> branch;       // 1 orthogonal, 0 momentum, -1 none
    std::vector<double> mom_err;   // ||gradF_S(W_t) - M_{t+1}||, t = 0..T, when tracked

    std::int64_t steps() const { return static_cast<std::int64_t>(loss.size()) - 1; }
};

// Constants estimated over the visited iterate region:
//   L_hat      max ||gradF_S(W) - gradF_S(W')||_F / ||W - W'||_F over iterate pairs
//   G_hat      max observed per-sample gradient norm
//   sigma_hat  max per-sample gradient deviation RMS at sampled iterates
struct BoundConstants {
    double L_hat = 0.0;
    double G_hat = 0.0;
    double sigma_hat = 0.0;
    int r = 1;

    double g_cap() const;   // max(G_hat, sqrt(r))
    double g_breve() const; // g_cap + 1/2
    BoundConstants inflated(double factor) const;
};

struct TrainRun {
    ConvergenceTrace trace;
    BoundConstants constants;
    optim::OptimizerState final_state;
    bool lemma_preconditions_checked = false;
    double final_loss = 0.0;
};

// Runs the configured optimizer for cfg.steps single-sample steps on a
// freshly generated dataset. Deterministic from the seeds. Throws
// DivergenceDetected when an iterate goes non-finite.
TrainRun run_training(const RunConfig& cfg);

struct StabilityTrace {
    std::vector<double> param_div; // ||W_t - W_t^(i)||_F
    std::vector<double> mom_div;   // ||M_t - M_t^(i)||_F
    std::vector<double> kappa_a, kappa_b;
    std::vector<int> branch_a, branch_b;
    std::vector<double> psi, phi;  // theoretical recursion with estimated constants
    bool blow_up = false;
    BoundConstants constants;
    double kappa_floor = 0.0;
    double final_loss_a = 0.0;
    double ortho_fraction_a = 0.0;

    std::int64_t steps() const { return static_cast<std::int64_t>(param_div.size()) - 1; }
};

// Runs the optimizer twice, on S and on the neighbor dataset S^(i), with
// the identical index sequence, and records the per-step divergences.
StabilityTrace stability_pair_run(const RunConfig& cfg, std::int64_t replace_index,
                                  std::uint64_t replacement_seed);

enum class BoundVariant { MuonBound, MiMuonBound };

struct BoundSequences {
    std::vector<double> psi, phi; // index t, starting at psi[0] = phi[0] = 0
};

// The stability recursions, from psi_1 = 2*beta*sigma/N:
//   psi_{t+1} = (1-beta) psi_t + beta L phi_t + 2 beta sigma / N
//   phi_{t+1} = (1-eta*lambda) phi_t + (2 sqrt2 eta / kappa) psi_{t+1}   (MuonBound)
//   phi_{t+1} = (1-eta*lambda) phi_t +  2 sqrt2 eta          psi_{t+1}   (MiMuonBound)
BoundSequences stability_bound_recursion(const BoundConstants& constants,
                                         const optim::HyperParams& hp, std::int64_t n_samples,
                                         std::int64_t steps, double kappa_floor,
                                         BoundVariant variant);

struct DkProbeResult {
    double lhs;   // ||U'V'^T - UV^T||_F across the perturbation
    double rhs;   // (2 sqrt2 / kappa) ||delta||_F
    double kappa; // singular gap of the unperturbed matrix
    bool satisfied;
};

// Compares the rotation of the orthogonal factor under an additive
// perturbation against the gap-controlled bound. Throws DegenerateSpectrum
// when either spectrum has a gap below 1e-10.
DkProbeResult davis_kahan_probe(const Matrix& m, const Matrix& delta);

struct LemmaReport {
    double max_step_ratio; // max_t ||W_t - W_{t-1}|| / (eta * g_breve)
    double max_norm_ratio; // max_t ||W_t|| / ((t+1) * eta * g_cap)
    std::int64_t violations;
    bool ok;
};

// Verifies the per-step iterate bounds along a recorded run. The run must
// have been produced with lemma_mode set, else PreconditionUnchecked.
LemmaReport lemma_bound_check(const TrainRun& run, const BoundConstants& constants,
                              const optim::HyperParams& hp);

struct MomentumErrorReport {
    double empirical_avg;   // time-averaged ||gradF_S(W_t) - M_{t+1}||_F
    double theoretical_rhs; // sigma/sqrt(T beta) + (sqrt2/beta) L eta g_breve + sqrt(beta) sigma
};

MomentumErrorReport momentum_error_track(const TrainRun& run, const BoundConstants& constants,
                                         const optim::HyperParams& hp);

// eta = c / T^(3/4), beta = 1 / sqrt(T)
struct Schedule {
    double eta;
    double beta;
};
Schedule schedule_for(std::int64_t steps, double eta_c);

double time_average(std::span<const double> values);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    bool degenerate = false; // some average was zero; slope undefined
};

// Least-squares slope of log(avg) against log(T). Requires at least four
// T values spanning at least two decades, else InsufficientData.
SlopeFit convergence_rate_fit(std::span<const double> t_values,
                              std::span<const double> avg_grad_norms);

struct SweepRow {
    double tau;
    std::uint64_t seed;
    double final_loss;
    double final_div;
    double ortho_fraction;
};

std::vector<SweepRow> tau_sweep(const RunConfig& cfg, std::span<const double> taus,
                                std::span<const std::uint64_t> seeds, std::int64_t replace_index,
                                std::uint64_t replacement_seed);

} // namespace matmuon::experiments
