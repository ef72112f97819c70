#include <benchmark/benchmark.h>

#include "matmuon/experiments.hpp"
#include "matmuon/prng.hpp"

using namespace matmuon;

namespace {

optim::HyperParams bench_hp(optim::SwitchMode sw, optim::OrthoMode om) {
    optim::HyperParams hp;
    hp.eta = 0.02;
    hp.beta = 0.3;
    hp.tau = 0.01;
    hp.switch_mode = sw;
    hp.ortho_mode = om;
    return hp;
}

void bm_step(benchmark::State& state, optim::Optimizer which, optim::SwitchMode sw,
             optim::OrthoMode om) {
    Xoshiro256pp rng(3);
    const int m = static_cast<int>(state.range(0));
    const int n = static_cast<int>(state.range(1));
    Matrix g(m, n);
    for (double& v : g.data()) v = rng.normal();
    auto s = optim::init_state(Matrix(m, n));
    const auto hp = bench_hp(sw, om);
    for (auto _ : state) {
        auto out = optim::step(which, s, g, hp);
        benchmark::DoNotOptimize(out.new_state.w.data().data());
    }
}

void bm_run_training(benchmark::State& state) {
    experiments::RunConfig cfg;
    cfg.problem.kind = problems::ProblemKind::MatrixRegression;
    cfg.problem.m = 8;
    cfg.problem.n = 6;
    cfg.problem.noise_sigma = 0.2;
    cfg.problem.ground_truth = problems::make_ground_truth(8, 6, 4, 0.5);
    cfg.n_samples = 50;
    cfg.steps = state.range(0);
    cfg.optimizer = optim::Optimizer::MiMuon;
    cfg.hp = bench_hp(optim::SwitchMode::ExactGap, optim::OrthoMode::ExactSvd);
    cfg.w0 = Matrix(8, 6);
    cfg.data_seed = 5;
    cfg.index_seed = 6;
    for (auto _ : state) {
        auto run = experiments::run_training(cfg);
        benchmark::DoNotOptimize(run.final_loss);
    }
}

} // namespace

BENCHMARK_CAPTURE(bm_step, sgdm, optim::Optimizer::Sgdm, optim::SwitchMode::FrobeniusProxy,
                  optim::OrthoMode::ExactSvd)
    ->Args({8, 6})
    ->Args({64, 64});
BENCHMARK_CAPTURE(bm_step, muon_exact, optim::Optimizer::Muon, optim::SwitchMode::FrobeniusProxy,
                  optim::OrthoMode::ExactSvd)
    ->Args({8, 6})
    ->Args({64, 64});
BENCHMARK_CAPTURE(bm_step, muon_ns, optim::Optimizer::Muon, optim::SwitchMode::FrobeniusProxy,
                  optim::OrthoMode::NewtonSchulz)
    ->Args({8, 6})
    ->Args({64, 64});
BENCHMARK_CAPTURE(bm_step, mimuon_gap, optim::Optimizer::MiMuon, optim::SwitchMode::ExactGap,
                  optim::OrthoMode::ExactSvd)
    ->Args({8, 6})
    ->Args({64, 64});
BENCHMARK(bm_run_training)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
