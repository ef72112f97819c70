#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "matmuon/matrix.hpp"

namespace matmuon::problems {

enum class ProblemKind { MatrixRegression, TanhRegression };

struct Sample {
    std::vector<double> x; // input, dimension n
    std::vector<double> y; // target, dimension m
    std::int64_t id = 0;   // index within its dataset
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
};

// One matrix-parameter objective. MatrixRegression is convex in w;
// TanhRegression is smooth nonconvex. noise_sigma scales the target noise
// and thereby the gradient-noise level.
struct ProblemSpec {
    ProblemKind kind = ProblemKind::MatrixRegression;
    int m = 2;
    int n = 2;
    double noise_sigma = 0.0;
    Matrix ground_truth; // w*, the generation parameter
};

// Ground truth with i.i.d. normal entries scaled by `scale`, drawn in
// row-major order from the stream seeded by gt_seed.
Matrix make_ground_truth(int m, int n, std::uint64_t gt_seed, double scale = 1.0);

// MatrixRegression: 0.5 ||w x - y||^2; TanhRegression: 0.5 ||tanh(w x) - y||^2.
double loss(const ProblemSpec& spec, const Matrix& w, const Sample& s);

// Analytic gradient of loss with respect to w.
Matrix grad(const ProblemSpec& spec, const Matrix& w, const Sample& s);

// Mean loss and mean gradient over the dataset. Throws InvalidInput when empty.
std::pair<double, Matrix> empirical_loss_and_grad(const ProblemSpec& spec, const Matrix& w,
                                                  const Dataset& d);

// Per sample: x ~ N(0, I), then y = w* x + noise (or tanh(w* x) + noise)
// with noise ~ N(0, noise_sigma^2) per coordinate. Draw order is x entries
// then noise entries, so datasets regenerate bitwise from (spec, n, seed).
Dataset generate_dataset(const ProblemSpec& spec, std::int64_t n_samples, std::uint64_t seed);

// An independent draw used to build the neighbor dataset S^(i).
Sample make_replacement_sample(const ProblemSpec& spec, std::uint64_t replacement_seed,
                               std::int64_t id);

// Neighbor dataset: identical to the base except at one position.
struct NeighborSpec {
    std::int64_t replace_index = 0;
    Sample replacement;

    Dataset apply(const Dataset& base) const;
};

// Uniform indices in [0, n_samples); the shared random index sequence
// consumed by paired stability runs.
std::vector<std::int64_t> sample_index_sequence(std::uint64_t seed, std::int64_t n_samples,
                                                std::int64_t steps);

// Flat audit form: header then one row per sample (id, x..., y...).
void write_dataset_csv(const Dataset& d, std::ostream& out);

} // namespace matmuon::problems
