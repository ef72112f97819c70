#include "randmat.hpp"

#include <algorithm>
#include <cmath>

#include "matmuon/linalg.hpp"

namespace matmuon::cli {

Matrix random_gaussian(Xoshiro256pp& rng, int m, int n) {
    Matrix out(m, n);
    for (double& v : out.data()) v = rng.normal();
    return out;
}

Matrix random_orthonormal(Xoshiro256pp& rng, int m, int r) {
    Matrix q(m, r);
    std::vector<double> col(static_cast<std::size_t>(m));
    for (int j = 0; j < r; ++j) {
        double norm = 0.0;
        do {
            for (double& v : col) v = rng.normal();
            for (int pass = 0; pass < 2; ++pass) {
                for (int c = 0; c < j; ++c) {
                    double proj = 0.0;
                    for (int i = 0; i < m; ++i) proj += col[i] * q(i, c);
                    for (int i = 0; i < m; ++i) col[i] -= proj * q(i, c);
                }
            }
            norm = 0.0;
            for (double v : col) norm += v * v;
            norm = std::sqrt(norm);
        } while (norm <= 1e-6);
        for (int i = 0; i < m; ++i) q(i, j) = col[i] / norm;
    }
    return q;
}

Matrix matrix_with_spectrum(Xoshiro256pp& rng, int m, int n, const std::vector<double>& sigma) {
    const int r = static_cast<int>(sigma.size());
    const Matrix u = random_orthonormal(rng, m, r);
    const Matrix v = random_orthonormal(rng, n, r);
    Matrix out(m, n);
    for (int k = 0; k < r; ++k)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                out(i, j) += sigma[k] * u(i, k) * v(j, k);
    return out;
}

DkPair make_dk_pair(Xoshiro256pp& rng, int m, int n, double delta_rel) {
    const int r = std::min(m, n);
    std::vector<double> gaps(static_cast<std::size_t>(r) - 1);
    double gap_max = 0.0;
    for (double& g : gaps) {
        g = 0.1 + 0.4 * rng.uniform01();
        gap_max = std::max(gap_max, g);
    }
    const double base = std::max(0.5, gap_max) + rng.uniform01();
    std::vector<double> sigma(static_cast<std::size_t>(r));
    sigma[static_cast<std::size_t>(r) - 1] = base;
    for (int k = r - 2; k >= 0; --k)
        sigma[static_cast<std::size_t>(k)] =
            sigma[static_cast<std::size_t>(k) + 1] + gaps[static_cast<std::size_t>(k)];
    const double kappa = *std::min_element(gaps.begin(), gaps.end());

    DkPair pair{matrix_with_spectrum(rng, m, n, sigma), random_gaussian(rng, m, n)};
    const double target = delta_rel * kappa * (0.1 + 0.9 * rng.uniform01());
    const double scale = target / linalg::frobenius_norm(pair.delta);
    for (double& v : pair.delta.data()) v *= scale;
    return pair;
}

} // namespace matmuon::cli
