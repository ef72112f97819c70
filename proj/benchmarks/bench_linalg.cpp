#include <benchmark/benchmark.h>

#include "matmuon/linalg.hpp"
#include "matmuon/prng.hpp"

using namespace matmuon;

namespace {

Matrix random_matrix(Xoshiro256pp& rng, int m, int n) {
    Matrix out(m, n);
    for (double& v : out.data()) v = rng.normal();
    return out;
}

void bm_svd(benchmark::State& state) {
    Xoshiro256pp rng(1);
    const int m = static_cast<int>(state.range(0));
    const int n = static_cast<int>(state.range(1));
    const Matrix mat = random_matrix(rng, m, n);
    for (auto _ : state) {
        auto f = linalg::svd(mat);
        benchmark::DoNotOptimize(f.sigma.data());
    }
}

void bm_newton_schulz(benchmark::State& state) {
    Xoshiro256pp rng(2);
    const int m = static_cast<int>(state.range(0));
    const int n = static_cast<int>(state.range(1));
    const Matrix mat = random_matrix(rng, m, n);
    for (auto _ : state) {
        Matrix q = linalg::newton_schulz(mat, 5);
        benchmark::DoNotOptimize(q.data().data());
    }
}

} // namespace

BENCHMARK(bm_svd)->Args({8, 6})->Args({32, 32})->Args({64, 64})->Args({128, 64});
BENCHMARK(bm_newton_schulz)->Args({8, 6})->Args({64, 64})->Args({256, 128});

BENCHMARK_MAIN();
