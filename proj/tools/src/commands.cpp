#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "csvio.hpp"
#include "randmat.hpp"

namespace matmuon::cli {

namespace {

using nlohmann::json;

const char* branch_name(int b) {
    if (b < 0) return "none";
    return b == 1 ? "orthogonal" : "momentum";
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json constants_json(const experiments::BoundConstants& c) {
    return json{{"L_hat", c.L_hat},   {"G_hat", c.G_hat},     {"sigma_hat", c.sigma_hat},
                {"r", c.r},           {"g_cap", c.g_cap()},   {"g_breve", c.g_breve()}};
}

void write_summary(const CommandContext& ctx, json results) {
    json doc;
    doc["resolved_config"] = ctx.cfg.resolved_json();
    doc["results"] = std::move(results);
    write_file_atomic(ctx.out_dir / "summary.json", doc.dump(2) + "\n");
}

std::string trace_csv(const experiments::ConvergenceTrace& tr) {
    std::string out = "t,loss,grad_norm,mom_norm,kappa,branch\n";
    for (std::int64_t t = 0; t <= tr.steps(); ++t) {
        out += csv_row({std::to_string(t), format_double(tr.loss[t]),
                        format_double(tr.grad_norm[t]), format_double(tr.mom_norm[t]),
                        format_double(tr.kappa[t]), branch_name(tr.branch[t])});
    }
    return out;
}

std::string stability_csv(const experiments::StabilityTrace& tr) {
    std::string out = "t,param_div,mom_div,kappa_a,kappa_b,branch_a,branch_b,psi,phi\n";
    for (std::int64_t t = 0; t <= tr.steps(); ++t) {
        out += csv_row({std::to_string(t), format_double(tr.param_div[t]),
                        format_double(tr.mom_div[t]), format_double(tr.kappa_a[t]),
                        format_double(tr.kappa_b[t]), branch_name(tr.branch_a[t]),
                        branch_name(tr.branch_b[t]), format_double(tr.psi[t]),
                        format_double(tr.phi[t])});
    }
    return out;
}

std::vector<experiments::StabilityTrace> run_stability_campaign(const CommandContext& ctx,
                                                                optim::Optimizer which) {
    const auto& cfg = ctx.cfg;
    std::vector<experiments::StabilityTrace> traces(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), ctx.threads, [&](std::size_t i) {
        experiments::RunConfig rc = cfg.run_config(cfg.seeds[i]);
        rc.optimizer = which;
        traces[i] = experiments::stability_pair_run(rc, cfg.replace_index,
                                                    cfg.replacement_seed + cfg.seeds[i]);
    });
    return traces;
}

} // namespace

void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(jobs, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

void cmd_train(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<experiments::TrainRun> runs(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), ctx.threads, [&](std::size_t i) {
        runs[i] = experiments::run_training(cfg.run_config(cfg.seeds[i]));
    });

    json per_seed = json::array();
    std::vector<double> final_losses;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::uint64_t seed = cfg.seeds[i];
        const auto& run = runs[i];
        const auto seed_dir = ctx.out_dir / ("seed_" + std::to_string(seed));
        write_file_atomic(seed_dir / "trace.csv", trace_csv(run.trace));
        if (cfg.dump_dataset) {
            const experiments::RunConfig rc = cfg.run_config(seed);
            const auto data = problems::generate_dataset(rc.problem, rc.n_samples, rc.data_seed);
            std::ostringstream csv;
            problems::write_dataset_csv(data, csv);
            write_file_atomic(seed_dir / "dataset.csv", csv.str());
        }

        json entry{{"seed", seed},
                   {"final_loss", run.final_loss},
                   {"final_grad_norm", run.trace.grad_norm.back()},
                   {"constants", constants_json(run.constants)}};
        if (cfg.lemma_mode) {
            const auto rep = experiments::lemma_bound_check(run, run.constants, cfg.hp);
            entry["lemma"] = {{"ok", rep.ok},
                              {"violations", rep.violations},
                              {"max_step_ratio", rep.max_step_ratio},
                              {"max_norm_ratio", rep.max_norm_ratio}};
        }
        if (cfg.track_momentum_error) {
            const auto rep =
                experiments::momentum_error_track(run, run.constants.inflated(2.0), cfg.hp);
            entry["momentum_error"] = {{"empirical_avg", rep.empirical_avg},
                                       {"rhs_inflated_x2", rep.theoretical_rhs},
                                       {"within_bound", rep.empirical_avg <= rep.theoretical_rhs}};
        }
        per_seed.push_back(std::move(entry));
        final_losses.push_back(run.final_loss);
    }
    write_summary(ctx, json{{"per_seed", per_seed}, {"median_final_loss", median(final_losses)}});
}

void cmd_stability(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto traces = run_stability_campaign(ctx, cfg.optimizer);

    json per_seed = json::array();
    std::vector<double> finals;
    std::int64_t len = std::numeric_limits<std::int64_t>::max();
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const std::uint64_t seed = cfg.seeds[i];
        write_file_atomic(ctx.out_dir / ("seed_" + std::to_string(seed)) / "stability.csv",
                          stability_csv(traces[i]));
        per_seed.push_back(json{{"seed", seed},
                                {"final_param_div", traces[i].param_div.back()},
                                {"final_mom_div", traces[i].mom_div.back()},
                                {"ortho_fraction", traces[i].ortho_fraction_a},
                                {"final_loss", traces[i].final_loss_a},
                                {"kappa_floor", traces[i].kappa_floor},
                                {"blow_up", traces[i].blow_up},
                                {"constants", constants_json(traces[i].constants)}});
        finals.push_back(traces[i].param_div.back());
        len = std::min(len, traces[i].steps());
    }

    // per-step medians across seeds
    std::string agg = "t,param_div_median,mom_div_median\n";
    for (std::int64_t t = 0; t <= len; ++t) {
        std::vector<double> p, m;
        for (const auto& tr : traces) {
            p.push_back(tr.param_div[t]);
            m.push_back(tr.mom_div[t]);
        }
        agg += csv_row({std::to_string(t), format_double(median(p)), format_double(median(m))});
    }
    write_file_atomic(ctx.out_dir / "median.csv", agg);

    json results{{"per_seed", per_seed}, {"median_final_param_div", median(finals)}};

    if (cfg.compare_with) {
        const auto other = run_stability_campaign(ctx, *cfg.compare_with);
        std::vector<double> other_finals;
        json other_seeds = json::array();
        for (std::size_t i = 0; i < other.size(); ++i) {
            other_finals.push_back(other[i].param_div.back());
            other_seeds.push_back(json{{"seed", cfg.seeds[i]},
                                       {"final_param_div", other[i].param_div.back()}});
        }
        json cmp{{"optimizer_a", optimizer_name(cfg.optimizer)},
                 {"optimizer_b", optimizer_name(*cfg.compare_with)},
                 {"median_final_param_div_a", median(finals)},
                 {"median_final_param_div_b", median(other_finals)},
                 {"per_seed_b", other_seeds}};
        write_file_atomic(ctx.out_dir / "comparison.json", cmp.dump(2) + "\n");
        results["comparison"] = cmp;
    }
    write_summary(ctx, std::move(results));
}

void cmd_probe(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    Xoshiro256pp rng(cfg.probe_seed);
    std::string csv = "pair,lhs,rhs,kappa,satisfied\n";
    std::int64_t satisfied = 0;
    for (std::int64_t i = 0; i < cfg.probe_pairs; ++i) {
        const DkPair pair = make_dk_pair(rng, cfg.probe_m, cfg.probe_n, cfg.probe_delta_rel);
        const auto r = experiments::davis_kahan_probe(pair.m, pair.delta);
        satisfied += r.satisfied;
        csv += csv_row({std::to_string(i), format_double(r.lhs), format_double(r.rhs),
                        format_double(r.kappa), r.satisfied ? "1" : "0"});
    }
    write_file_atomic(ctx.out_dir / "probe.csv", csv);
    write_summary(ctx, json{{"n_pairs", cfg.probe_pairs},
                            {"satisfied", satisfied},
                            {"satisfied_fraction",
                             static_cast<double>(satisfied) /
                                 static_cast<double>(cfg.probe_pairs)}});
}

void cmd_convergence(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const std::size_t jobs = cfg.t_values.size() * cfg.seeds.size();
    std::vector<double> avgs(jobs);
    parallel_for(jobs, ctx.threads, [&](std::size_t i) {
        const std::size_t ti = i / cfg.seeds.size();
        const std::size_t si = i % cfg.seeds.size();
        const std::int64_t T = cfg.t_values[ti];
        const auto sched = experiments::schedule_for(T, cfg.eta_c);
        experiments::RunConfig rc = cfg.run_config(cfg.seeds[si]);
        rc.steps = T;
        rc.hp.eta = sched.eta;
        rc.hp.beta = sched.beta;
        avgs[i] = experiments::time_average(experiments::run_training(rc).trace.grad_norm);
    });

    std::string csv = "T,seed,avg_grad_norm\n";
    std::vector<double> t_points, mean_avgs;
    json points = json::array();
    for (std::size_t ti = 0; ti < cfg.t_values.size(); ++ti) {
        double mean = 0.0;
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const double a = avgs[ti * cfg.seeds.size() + si];
            csv += csv_row({std::to_string(cfg.t_values[ti]), std::to_string(cfg.seeds[si]),
                            format_double(a)});
            mean += a;
        }
        mean /= static_cast<double>(cfg.seeds.size());
        t_points.push_back(static_cast<double>(cfg.t_values[ti]));
        mean_avgs.push_back(mean);
        points.push_back(json{{"T", cfg.t_values[ti]}, {"mean_avg_grad_norm", mean}});
    }
    write_file_atomic(ctx.out_dir / "convergence.csv", csv);

    const auto fit = experiments::convergence_rate_fit(t_points, mean_avgs);
    write_summary(ctx, json{{"points", points},
                            {"slope", fit.degenerate ? json() : json(fit.slope)},
                            {"intercept", fit.degenerate ? json() : json(fit.intercept)},
                            {"degenerate", fit.degenerate}});
}

void cmd_sweep(const CommandContext& ctx) {
    const auto& cfg = ctx.cfg;
    const auto rows = experiments::tau_sweep(cfg.run_config(0), cfg.taus, cfg.seeds,
                                             cfg.replace_index, cfg.replacement_seed);
    std::string csv = "tau,seed,final_loss,final_div,ortho_fraction\n";
    for (const auto& row : rows)
        csv += csv_row({format_double(row.tau), std::to_string(row.seed),
                        format_double(row.final_loss), format_double(row.final_div),
                        format_double(row.ortho_fraction)});
    write_file_atomic(ctx.out_dir / "sweep.csv", csv);

    json per_tau = json::array();
    for (double tau : cfg.taus) {
        std::vector<double> losses, divs, fracs;
        for (const auto& row : rows) {
            if (row.tau != tau) continue;
            losses.push_back(row.final_loss);
            divs.push_back(row.final_div);
            fracs.push_back(row.ortho_fraction);
        }
        per_tau.push_back(json{{"tau", tau},
                               {"median_final_loss", median(losses)},
                               {"median_final_div", median(divs)},
                               {"median_ortho_fraction", median(fracs)}});
    }
    write_summary(ctx, json{{"per_tau", per_tau}});
}

int run_command(const CommandContext& ctx) {
    try {
        switch (ctx.cfg.type) {
            case ExperimentType::Train: cmd_train(ctx); break;
            case ExperimentType::Stability: cmd_stability(ctx); break;
            case ExperimentType::Probe: cmd_probe(ctx); break;
            case ExperimentType::Convergence: cmd_convergence(ctx); break;
            case ExperimentType::Sweep: cmd_sweep(ctx); break;
        }
        return 0;
    } catch (const DivergenceDetected& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace matmuon::cli
