#include "matmuon/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace matmuon::linalg {

namespace {

// Column-major scratch for the Jacobi sweep: col(j) is contiguous.
struct ColMat {
    int m, n;
    std::vector<double> a;

    ColMat(int m_, int n_) : m(m_), n(n_), a(static_cast<std::size_t>(m_) * n_, 0.0) {}

    double* col(int j) { return a.data() + static_cast<std::size_t>(j) * m; }
    const double* col(int j) const { return a.data() + static_cast<std::size_t>(j) * m; }
};

double dot(const double* x, const double* y, int m) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += x[i] * y[i];
    return s;
}

// SVD of a thin matrix (rows >= cols). Returns u (rows x cols, orthonormal),
// sigma (cols, non-increasing), v (cols x cols, orthonormal).
SvdResult svd_thin(const Matrix& in) {
    const int m = in.rows(), n = in.cols();
    ColMat work(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            work.col(j)[i] = in(i, j);

    ColMat vwork(n, n);
    for (int j = 0; j < n; ++j) vwork.col(j)[j] = 1.0;

    bool converged = (n < 2);
    for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
        converged = true;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double* ap = work.col(p);
                double* aq = work.col(q);
                const double alpha = dot(ap, ap, m);
                const double beta = dot(aq, aq, m);
                const double gamma = dot(ap, aq, m);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
                converged = false;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;

                for (int i = 0; i < m; ++i) {
                    const double vp = ap[i], vq = aq[i];
                    ap[i] = cs * vp - sn * vq;
                    aq[i] = sn * vp + cs * vq;
                }
                double* bp = vwork.col(p);
                double* bq = vwork.col(q);
                for (int i = 0; i < n; ++i) {
                    const double vp = bp[i], vq = bq[i];
                    bp[i] = cs * vp - sn * vq;
                    bq[i] = sn * vp + cs * vq;
                }
            }
        }
    }
    if (!converged) throw SvdNoConverge("Jacobi sweeps exhausted without convergence");

    std::vector<double> sigma(n);
    for (int j = 0; j < n; ++j) sigma[j] = std::sqrt(dot(work.col(j), work.col(j), m));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sigma[a] > sigma[b]; });

    SvdResult out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    for (int jj = 0; jj < n; ++jj) {
        const int j = order[jj];
        out.sigma[jj] = sigma[j];
        for (int i = 0; i < n; ++i) out.v(i, jj) = vwork.col(j)[i];
        if (sigma[j] > 0.0) {
            const double inv = 1.0 / sigma[j];
            for (int i = 0; i < m; ++i) out.u(i, jj) = work.col(j)[i] * inv;
        }
    }

    // Columns with an exactly zero singular value carry no direction; fill
    // them with an orthonormal completion so u^T u = I still holds.
    for (int jj = 0; jj < n; ++jj) {
        if (out.sigma[jj] > 0.0) continue;
        std::vector<double> best(m, 0.0);
        double best_norm = -1.0;
        for (int k = 0; k < m; ++k) {
            std::vector<double> cand(m, 0.0);
            cand[k] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (int c = 0; c < n; ++c) {
                    if (c == jj || (out.sigma[c] == 0.0 && c > jj)) continue;
                    double proj = 0.0;
                    for (int i = 0; i < m; ++i) proj += cand[i] * out.u(i, c);
                    for (int i = 0; i < m; ++i) cand[i] -= proj * out.u(i, c);
                }
            }
            const double nrm = std::sqrt(dot(cand.data(), cand.data(), m));
            if (nrm > best_norm) {
                best_norm = nrm;
                best = std::move(cand);
            }
        }
        const double inv = 1.0 / best_norm;
        for (int i = 0; i < m; ++i) out.u(i, jj) = best[i] * inv;
    }
    return out;
}

} // namespace

SvdResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("svd: empty matrix");
    if (!m.all_finite()) throw InvalidMatrix("svd: non-finite entries");
    if (std::min(m.rows(), m.cols()) > 512)
        throw InvalidInput("svd: exact path is limited to min(rows, cols) <= 512");

    if (m.rows() >= m.cols()) return svd_thin(m);

    SvdResult t = svd_thin(transpose(m));
    return SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

Matrix newton_schulz(const Matrix& m, int steps, NsCoeffs coeffs) {
    if (steps < 1) throw InvalidInput("newton_schulz: steps must be >= 1");
    if (!m.all_finite()) throw InvalidMatrix("newton_schulz: non-finite entries");
    const double norm = frobenius_norm(m);
    if (norm == 0.0) throw ZeroInput("newton_schulz: zero matrix");

    const bool tall = m.rows() > m.cols();
    Matrix x = tall ? transpose(m) : m;
    for (double& v : x.data()) v /= norm;

    for (int k = 0; k < steps; ++k) {
        const Matrix gram = matmul(x, transpose(x));               // r x r
        const Matrix gram2 = matmul(gram, gram);
        Matrix poly = coeffs.b * gram + coeffs.c * gram2;          // bA + cA^2
        x = coeffs.a * x + matmul(poly, x);
    }
    return tall ? transpose(x) : x;
}

double singular_gap(std::span<const double> sigma, double zero_tol) {
    if (sigma.empty()) throw InvalidInput("singular_gap: empty spectrum");
    for (std::size_t i = 0; i + 1 < sigma.size(); ++i)
        if (sigma[i] < sigma[i + 1])
            throw InvalidInput("singular_gap: spectrum must be sorted non-increasing");

    std::vector<double> kept;
    kept.reserve(sigma.size());
    for (double s : sigma)
        if (s > zero_tol) kept.push_back(s);
    if (kept.size() < 2) return std::numeric_limits<double>::infinity();

    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < kept.size(); ++i)
        gap = std::min(gap, kept[i] - kept[i + 1]);
    return gap;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
}

double orthogonality_defect(const Matrix& q) {
    if (q.rows() < q.cols())
        throw InvalidInput("orthogonality_defect: expected a thin matrix (rows >= cols)");
    double s = 0.0;
    for (int a = 0; a < q.cols(); ++a) {
        for (int b = 0; b < q.cols(); ++b) {
            double d = 0.0;
            for (int i = 0; i < q.rows(); ++i) d += q(i, a) * q(i, b);
            if (a == b) d -= 1.0;
            s += d * d;
        }
    }
    return std::sqrt(s);
}

} // namespace matmuon::linalg
