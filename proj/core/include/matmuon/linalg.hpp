#pragma once

#include <span>
#include <vector>

#include "matmuon/matrix.hpp"

namespace matmuon::linalg {

// Thin SVD factors: u is m x r with orthonormal columns, v is n x r with
// orthonormal columns, sigma holds r = min(m, n) singular values sorted
// non-increasing, and u * diag(sigma) * v^T reconstructs the input.
struct SvdResult {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

// One-sided Jacobi on the thinner orientation with a fixed cyclic sweep
// order, so repeated calls on the same input are bitwise identical.
// Throws InvalidMatrix on non-finite input, SvdNoConverge past the sweep
// cap, InvalidInput when min(rows, cols) > 512.
SvdResult svd(const Matrix& m);

inline constexpr int kMaxJacobiSweeps = 60;
inline constexpr double kJacobiTol = 1e-14;

struct NsCoeffs {
    double a, b, c;
};

// Quintic coefficients from the reference Muon procedure. Fast at inflating
// small singular values but oscillates around 1 instead of converging.
inline constexpr NsCoeffs kMuonQuintic{3.4445, -4.7750, 2.0315};

// Classical iteration; contracts monotonically toward the orthogonal factor
// for singular values in (0, sqrt(3)).
inline constexpr NsCoeffs kClassicCubic{1.5, -0.5, 0.0};

// Approximates u * v^T of m without an SVD:
//   X_0 = m / ||m||_F  (transposed first when rows > cols, back at the end)
//   X_{k+1} = a X_k + b (X_k X_k^T) X_k + c (X_k X_k^T)^2 X_k
Matrix newton_schulz(const Matrix& m, int steps, NsCoeffs coeffs = kMuonQuintic);

// Minimum pairwise distance between singular values above zero_tol.
// Returns +infinity when fewer than two survive the filter (an isolated
// spectrum trivially satisfies any gap threshold). sigma must be sorted
// non-increasing.
double singular_gap(std::span<const double> sigma, double zero_tol);

double frobenius_norm(const Matrix& m);

// ||q^T q - I||_F for a thin (rows >= cols) matrix.
double orthogonality_defect(const Matrix& q);

// Rank cutoff used both for dropping columns in the orthogonal factor and
// for filtering the spectrum before gap measurement.
inline double rank_zero_tol(double frob) { return 1e-12 * frob; }

} // namespace matmuon::linalg
