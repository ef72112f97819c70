#pragma once

// Seeded random-matrix constructions shared by the probe command and the
// acceptance suite: orthonormal factors via modified Gram-Schmidt, matrices
// with a prescribed spectrum, and perturbation pairs for the gap probe.

#include <vector>

#include "matmuon/matrix.hpp"
#include "matmuon/prng.hpp"

namespace matmuon::cli {

Matrix random_gaussian(Xoshiro256pp& rng, int m, int n);

// m x r with orthonormal columns, r <= m.
Matrix random_orthonormal(Xoshiro256pp& rng, int m, int r);

// u * diag(sigma) * v^T with fresh orthonormal factors.
Matrix matrix_with_spectrum(Xoshiro256pp& rng, int m, int n, const std::vector<double>& sigma);

struct DkPair {
    Matrix m;
    Matrix delta;
};

// Spectrum drawn gaps-first with the smallest singular value at least as
// large as every adjacent gap, then a gaussian perturbation scaled to at
// most delta_rel * kappa. This is the regime of the gap bound: all
// rotation must come through adjacent-gap mixing, not through the
// gap-to-zero of a rectangular spectrum.
DkPair make_dk_pair(Xoshiro256pp& rng, int m, int n, double delta_rel);

} // namespace matmuon::cli
