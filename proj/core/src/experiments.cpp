#include "matmuon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace matmuon::experiments {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

struct ConstantsEstimator {
    BoundConstants c;

    explicit ConstantsEstimator(int r) { c.r = r; }

    void consumed_grad(double norm) { c.G_hat = std::max(c.G_hat, norm); }

    void lipschitz_pair(double dgrad, double dw) {
        if (dw > 1e-14) c.L_hat = std::max(c.L_hat, dgrad / dw);
    }

    // One full pass: refreshes G_hat against every per-sample gradient and
    // sigma_hat against the deviation RMS around the mean gradient.
    void full_scan(const problems::ProblemSpec& spec, const problems::Dataset& data,
                   const Matrix& w, const Matrix& full_grad) {
        double dev2 = 0.0;
        for (const auto& s : data.samples) {
            const Matrix gi = problems::grad(spec, w, s);
            c.G_hat = std::max(c.G_hat, linalg::frobenius_norm(gi));
            dev2 += std::pow(linalg::frobenius_norm(gi - full_grad), 2);
        }
        dev2 /= static_cast<double>(data.samples.size());
        c.sigma_hat = std::max(c.sigma_hat, std::sqrt(dev2));
    }
};

bool lemma_preconditions_hold(const RunConfig& cfg, const BoundConstants& constants) {
    const double eta_gcap = cfg.hp.eta * constants.g_cap();
    if (linalg::frobenius_norm(cfg.w0) > eta_gcap) return false;
    const double lam_cap = 1.0 / (2.0 * static_cast<double>(1 + cfg.steps) * eta_gcap);
    return cfg.hp.lambda <= lam_cap; // lam_cap is +inf when eta*g_cap == 0
}

} // namespace

RunConfig with_seed_offset(RunConfig cfg, std::uint64_t offset) {
    cfg.data_seed += offset;
    cfg.index_seed += offset;
    return cfg;
}

double BoundConstants::g_cap() const { return std::max(G_hat, std::sqrt(static_cast<double>(r))); }
double BoundConstants::g_breve() const { return g_cap() + 0.5; }

BoundConstants BoundConstants::inflated(double factor) const {
    BoundConstants out = *this;
    out.L_hat *= factor;
    out.G_hat *= factor;
    out.sigma_hat *= factor;
    return out;
}

TrainRun run_training(const RunConfig& cfg) {
    cfg.hp.validate();
    if (cfg.steps < 0) throw InvalidInput("run_training: steps must be >= 0");
    if (cfg.w0.rows() != cfg.problem.m || cfg.w0.cols() != cfg.problem.n)
        throw ShapeError("run_training: w0 does not match problem dimensions");

    const problems::Dataset data =
        problems::generate_dataset(cfg.problem, cfg.n_samples, cfg.data_seed);
    const std::int64_t draws = cfg.steps + (cfg.track_momentum_error ? 1 : 0);
    const std::vector<std::int64_t> indices =
        draws > 0 ? problems::sample_index_sequence(cfg.index_seed, cfg.n_samples, draws)
                  : std::vector<std::int64_t>{};

    optim::OptimizerState state = optim::init_state(cfg.w0);
    ConstantsEstimator est(std::min(cfg.problem.m, cfg.problem.n));

    ConvergenceTrace tr;
    auto [l0, g0] = problems::empirical_loss_and_grad(cfg.problem, state.w, data);
    tr.loss.push_back(l0);
    tr.grad_norm.push_back(linalg::frobenius_norm(g0));
    tr.mom_norm.push_back(0.0);
    tr.kappa.push_back(std::numeric_limits<double>::infinity());
    tr.w_norm.push_back(linalg::frobenius_norm(state.w));
    tr.step_norm.push_back(0.0);
    tr.branch.push_back(-1);

    const std::int64_t scan_every = std::max<std::int64_t>(1, cfg.steps / 32);
    est.full_scan(cfg.problem, data, state.w, g0);

    Matrix prev_full_grad = g0;
    for (std::int64_t t = 1; t <= cfg.steps; ++t) {
        const auto& sample = data.samples[static_cast<std::size_t>(indices[t - 1])];
        const Matrix g = problems::grad(cfg.problem, state.w, sample);
        if (!g.all_finite()) throw DivergenceDetected(t);
        est.consumed_grad(linalg::frobenius_norm(g));

        optim::StepOutcome out = [&] {
            try {
                return optim::step(cfg.optimizer, state, g, cfg.hp);
            } catch (const InvalidMatrix&) {
                // a finite-input step only produces non-finite values when
                // the trajectory has overflowed
                throw DivergenceDetected(t);
            }
        }();
        if (!out.new_state.w.all_finite() || !out.new_state.m.all_finite())
            throw DivergenceDetected(t);

        if (cfg.track_momentum_error)
            tr.mom_err.push_back(linalg::frobenius_norm(prev_full_grad - out.new_state.m));

        auto [lt, gt] = problems::empirical_loss_and_grad(cfg.problem, out.new_state.w, data);
        tr.loss.push_back(lt);
        tr.grad_norm.push_back(linalg::frobenius_norm(gt));
        tr.mom_norm.push_back(linalg::frobenius_norm(out.new_state.m));
        tr.kappa.push_back(optim::measured_kappa(out.new_state.m));
        tr.w_norm.push_back(linalg::frobenius_norm(out.new_state.w));
        tr.step_norm.push_back(linalg::frobenius_norm(out.new_state.w - state.w));
        tr.branch.push_back(out.branch == optim::Branch::Orthogonal ? 1 : 0);

        est.lipschitz_pair(linalg::frobenius_norm(gt - prev_full_grad), tr.step_norm.back());
        if (t % scan_every == 0) est.full_scan(cfg.problem, data, out.new_state.w, gt);

        prev_full_grad = std::move(gt);
        state = std::move(out.new_state);
    }

    // Final lemma term pairs gradF_S(W_T) with M_{T+1} from one extra draw.
    if (cfg.track_momentum_error) {
        const auto& sample = data.samples[static_cast<std::size_t>(indices[cfg.steps])];
        const Matrix g = problems::grad(cfg.problem, state.w, sample);
        est.consumed_grad(linalg::frobenius_norm(g));
        const Matrix m_next = optim::momentum_update(state.m, g, cfg.hp.beta);
        tr.mom_err.push_back(linalg::frobenius_norm(prev_full_grad - m_next));
    }

    TrainRun run;
    run.final_loss = tr.loss.back();
    run.trace = std::move(tr);
    run.constants = est.c;
    run.final_state = std::move(state);
    if (cfg.lemma_mode) {
        if (!lemma_preconditions_hold(cfg, run.constants))
            throw InvalidInput("run_training: lemma preconditions violated "
                               "(need ||W_0|| <= eta*g_cap and lambda <= 1/(2(1+T) eta g_cap))");
        run.lemma_preconditions_checked = true;
    }
    return run;
}

StabilityTrace stability_pair_run(const RunConfig& cfg, std::int64_t replace_index,
                                  std::uint64_t replacement_seed) {
    cfg.hp.validate();
    if (replace_index < 0 || replace_index >= cfg.n_samples)
        throw InvalidInput("stability_pair_run: replace_index out of range");

    const problems::Dataset data_a =
        problems::generate_dataset(cfg.problem, cfg.n_samples, cfg.data_seed);
    problems::NeighborSpec neighbor{
        replace_index,
        problems::make_replacement_sample(cfg.problem, replacement_seed, replace_index)};
    const problems::Dataset data_b = neighbor.apply(data_a);

    const std::vector<std::int64_t> indices =
        cfg.steps > 0 ? problems::sample_index_sequence(cfg.index_seed, cfg.n_samples, cfg.steps)
                      : std::vector<std::int64_t>{};

    optim::OptimizerState sa = optim::init_state(cfg.w0);
    optim::OptimizerState sb = optim::init_state(cfg.w0);

    StabilityTrace tr;
    tr.param_div.push_back(0.0);
    tr.mom_div.push_back(0.0);
    tr.kappa_a.push_back(std::numeric_limits<double>::infinity());
    tr.kappa_b.push_back(std::numeric_limits<double>::infinity());
    tr.branch_a.push_back(-1);
    tr.branch_b.push_back(-1);

    ConstantsEstimator est(std::min(cfg.problem.m, cfg.problem.n));
    const std::int64_t scan_every = std::max<std::int64_t>(1, cfg.steps / 16);
    Matrix prev_scan_w = sa.w;
    Matrix prev_scan_grad = problems::empirical_loss_and_grad(cfg.problem, sa.w, data_a).second;
    est.full_scan(cfg.problem, data_a, sa.w, prev_scan_grad);

    std::int64_t ortho_steps = 0;
    for (std::int64_t t = 1; t <= cfg.steps; ++t) {
        const std::size_t j = static_cast<std::size_t>(indices[t - 1]);
        const Matrix ga = problems::grad(cfg.problem, sa.w, data_a.samples[j]);
        const Matrix gb = problems::grad(cfg.problem, sb.w, data_b.samples[j]);
        if (!ga.all_finite() || !gb.all_finite()) {
            tr.blow_up = true;
            break;
        }
        est.consumed_grad(linalg::frobenius_norm(ga));

        optim::StepOutcome oa, ob;
        try {
            oa = optim::step(cfg.optimizer, sa, ga, cfg.hp);
            ob = optim::step(cfg.optimizer, sb, gb, cfg.hp);
        } catch (const InvalidMatrix&) {
            tr.blow_up = true;
            break;
        }
        if (!oa.new_state.w.all_finite() || !ob.new_state.w.all_finite() ||
            !oa.new_state.m.all_finite() || !ob.new_state.m.all_finite()) {
            tr.blow_up = true;
            break;
        }

        tr.param_div.push_back(linalg::frobenius_norm(oa.new_state.w - ob.new_state.w));
        tr.mom_div.push_back(linalg::frobenius_norm(oa.new_state.m - ob.new_state.m));
        tr.kappa_a.push_back(optim::measured_kappa(oa.new_state.m));
        tr.kappa_b.push_back(optim::measured_kappa(ob.new_state.m));
        tr.branch_a.push_back(oa.branch == optim::Branch::Orthogonal ? 1 : 0);
        tr.branch_b.push_back(ob.branch == optim::Branch::Orthogonal ? 1 : 0);
        if (oa.branch == optim::Branch::Orthogonal) ++ortho_steps;

        sa = std::move(oa.new_state);
        sb = std::move(ob.new_state);

        if (t % scan_every == 0) {
            const Matrix fg = problems::empirical_loss_and_grad(cfg.problem, sa.w, data_a).second;
            est.full_scan(cfg.problem, data_a, sa.w, fg);
            est.lipschitz_pair(linalg::frobenius_norm(fg - prev_scan_grad),
                               linalg::frobenius_norm(sa.w - prev_scan_w));
            prev_scan_w = sa.w;
            prev_scan_grad = fg;
        }
    }

    tr.constants = est.c;
    tr.ortho_fraction_a =
        cfg.steps > 0 ? static_cast<double>(ortho_steps) / static_cast<double>(cfg.steps) : 0.0;
    if (!tr.blow_up) tr.final_loss_a = problems::empirical_loss_and_grad(cfg.problem, sa.w, data_a).first;

    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t < tr.kappa_a.size(); ++t) {
        if (std::isfinite(tr.kappa_a[t])) floor = std::min(floor, tr.kappa_a[t]);
        if (std::isfinite(tr.kappa_b[t])) floor = std::min(floor, tr.kappa_b[t]);
    }
    tr.kappa_floor = std::isfinite(floor) ? std::max(floor, 1e-10) : 1e-10;

    const BoundVariant variant = cfg.optimizer == optim::Optimizer::Muon
                                     ? BoundVariant::MuonBound
                                     : BoundVariant::MiMuonBound;
    const std::int64_t recorded = static_cast<std::int64_t>(tr.param_div.size()) - 1;
    if (recorded > 0) {
        BoundSequences seq = stability_bound_recursion(tr.constants, cfg.hp, cfg.n_samples,
                                                       recorded, tr.kappa_floor, variant);
        tr.psi = std::move(seq.psi);
        tr.phi = std::move(seq.phi);
    } else {
        tr.psi.assign(1, 0.0);
        tr.phi.assign(1, 0.0);
    }
    return tr;
}

BoundSequences stability_bound_recursion(const BoundConstants& constants,
                                         const optim::HyperParams& hp, std::int64_t n_samples,
                                         std::int64_t steps, double kappa_floor,
                                         BoundVariant variant) {
    if (steps < 1) throw InvalidInput("stability_bound_recursion: steps must be >= 1");
    if (n_samples < 1) throw InvalidInput("stability_bound_recursion: n_samples must be >= 1");
    if (variant == BoundVariant::MuonBound && !(kappa_floor > 0.0))
        throw InvalidInput("stability_bound_recursion: MuonBound needs kappa_floor > 0");

    const double beta = hp.beta;
    const double noise_term = 2.0 * beta * constants.sigma_hat / static_cast<double>(n_samples);
    const double decay = 1.0 - hp.eta * hp.lambda;
    const double gain = variant == BoundVariant::MuonBound
                            ? 2.0 * kSqrt2 * hp.eta / kappa_floor
                            : 2.0 * kSqrt2 * hp.eta;

    BoundSequences out;
    out.psi.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    out.phi.assign(static_cast<std::size_t>(steps) + 1, 0.0);
    for (std::int64_t t = 0; t < steps; ++t) {
        const double psi_next =
            (1.0 - beta) * out.psi[t] + beta * constants.L_hat * out.phi[t] + noise_term;
        out.psi[t + 1] = psi_next;
        out.phi[t + 1] = decay * out.phi[t] + gain * psi_next;
    }
    return out;
}

DkProbeResult davis_kahan_probe(const Matrix& m, const Matrix& delta) {
    require_same_shape(m, delta, "davis_kahan_probe: shape mismatch");
    const double kappa = optim::measured_kappa(m);
    const double kappa_pert = optim::measured_kappa(m + delta);
    if (kappa < 1e-10 || kappa_pert < 1e-10)
        throw DegenerateSpectrum("davis_kahan_probe: singular gap below 1e-10");

    const Matrix base = optim::gradient_mapping(m, 0.0, optim::OrthoMode::ExactSvd, 1);
    const Matrix pert = optim::gradient_mapping(m + delta, 0.0, optim::OrthoMode::ExactSvd, 1);
    DkProbeResult r;
    r.kappa = kappa;
    r.lhs = linalg::frobenius_norm(pert - base);
    r.rhs = 2.0 * kSqrt2 / kappa * linalg::frobenius_norm(delta);
    r.satisfied = r.lhs <= r.rhs;
    return r;
}

LemmaReport lemma_bound_check(const TrainRun& run, const BoundConstants& constants,
                              const optim::HyperParams& hp) {
    if (!run.lemma_preconditions_checked)
        throw PreconditionUnchecked("lemma_bound_check: run was not produced in lemma mode");

    const double step_cap = hp.eta * constants.g_breve();
    const double norm_cap_unit = hp.eta * constants.g_cap();
    LemmaReport rep{0.0, 0.0, 0, true};
    for (std::int64_t t = 1; t <= run.trace.steps(); ++t) {
        const double sr = run.trace.step_norm[t] / step_cap;
        const double nr = run.trace.w_norm[t] / (static_cast<double>(t + 1) * norm_cap_unit);
        rep.max_step_ratio = std::max(rep.max_step_ratio, sr);
        rep.max_norm_ratio = std::max(rep.max_norm_ratio, nr);
        if (sr > 1.0 || nr > 1.0) ++rep.violations;
    }
    rep.ok = rep.violations == 0;
    return rep;
}

MomentumErrorReport momentum_error_track(const TrainRun& run, const BoundConstants& constants,
                                         const optim::HyperParams& hp) {
    if (run.trace.mom_err.empty())
        throw InvalidInput("momentum_error_track: run did not track the momentum error");
    const double T = static_cast<double>(run.trace.steps());
    MomentumErrorReport rep;
    rep.empirical_avg = time_average(run.trace.mom_err);
    rep.theoretical_rhs = constants.sigma_hat / std::sqrt(T * hp.beta) +
                          kSqrt2 / hp.beta * constants.L_hat * hp.eta * constants.g_breve() +
                          std::sqrt(hp.beta) * constants.sigma_hat;
    return rep;
}

Schedule schedule_for(std::int64_t steps, double eta_c) {
    if (steps < 1) throw InvalidInput("schedule_for: steps must be >= 1");
    const double T = static_cast<double>(steps);
    return Schedule{eta_c / std::pow(T, 0.75), 1.0 / std::sqrt(T)};
}

double time_average(std::span<const double> values) {
    if (values.empty()) throw InvalidInput("time_average: empty series");
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

SlopeFit convergence_rate_fit(std::span<const double> t_values,
                              std::span<const double> avg_grad_norms) {
    if (t_values.size() != avg_grad_norms.size())
        throw InvalidInput("convergence_rate_fit: mismatched series lengths");
    if (t_values.size() < 4)
        throw InsufficientData("convergence_rate_fit: need at least 4 values of T");
    const auto [lo, hi] = std::minmax_element(t_values.begin(), t_values.end());
    if (!(*lo > 0.0) || *hi / *lo < 100.0)
        throw InsufficientData("convergence_rate_fit: T values must span at least two decades");

    SlopeFit fit;
    for (double a : avg_grad_norms) {
        if (!(a > 0.0)) {
            fit.degenerate = true;
            fit.slope = std::numeric_limits<double>::quiet_NaN();
            return fit;
        }
    }

    const std::size_t n = t_values.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log(t_values[i]);
        const double y = std::log(avg_grad_norms[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    fit.slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / static_cast<double>(n);
    return fit;
}

std::vector<SweepRow> tau_sweep(const RunConfig& cfg, std::span<const double> taus,
                                std::span<const std::uint64_t> seeds, std::int64_t replace_index,
                                std::uint64_t replacement_seed) {
    if (taus.empty() || seeds.empty()) throw InvalidInput("tau_sweep: empty tau or seed list");
    std::vector<SweepRow> rows;
    rows.reserve(taus.size() * seeds.size());
    for (double tau : taus) {
        for (std::uint64_t seed : seeds) {
            RunConfig c = with_seed_offset(cfg, seed);
            c.hp.tau = tau;
            StabilityTrace tr = stability_pair_run(c, replace_index, replacement_seed + seed);
            rows.push_back(SweepRow{tau, seed, tr.final_loss_a, tr.param_div.back(),
                                    tr.ortho_fraction_a});
        }
    }
    return rows;
}

} // namespace matmuon::experiments
