#pragma once

// Shared generators for the test suites. Orthogonal factors come from
// modified Gram-Schmidt on gaussian draws, so constructions with a known
// spectrum do not depend on the SVD under test.

#include <cmath>
#include <vector>

#include "matmuon/matrix.hpp"
#include "matmuon/prng.hpp"

namespace testsupport {

inline matmuon::Matrix random_matrix(matmuon::Xoshiro256pp& rng, int m, int n) {
    matmuon::Matrix out(m, n);
    for (double& v : out.data()) v = rng.normal();
    return out;
}

// m x r with orthonormal columns (requires r <= m).
inline matmuon::Matrix random_orthonormal(matmuon::Xoshiro256pp& rng, int m, int r) {
    matmuon::Matrix q(m, r);
    for (int j = 0; j < r; ++j) {
        std::vector<double> col(m);
        double norm = 0.0;
        while (true) {
            for (int i = 0; i < m; ++i) col[i] = rng.normal();
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
            if (norm > 1e-6) break;
        }
        for (int i = 0; i < m; ++i) q(i, j) = col[i] / norm;
    }
    return q;
}

// u * diag(sigma) * v^T with u, v freshly drawn orthonormal factors.
inline matmuon::Matrix matrix_with_spectrum(matmuon::Xoshiro256pp& rng, int m, int n,
                                            const std::vector<double>& sigma) {
    const int r = static_cast<int>(sigma.size());
    const matmuon::Matrix u = random_orthonormal(rng, m, r);
    const matmuon::Matrix v = random_orthonormal(rng, n, r);
    matmuon::Matrix out(m, n);
    for (int k = 0; k < r; ++k)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                out(i, j) += sigma[k] * u(i, k) * v(j, k);
    return out;
}

} // namespace testsupport
