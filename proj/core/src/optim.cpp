#include "matmuon/optim.hpp"

#include <cmath>
#include <utility>

namespace matmuon::optim {

void HyperParams::validate() const {
    if (!(eta >= 0.0)) throw InvalidInput("hyperparams: eta must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidInput("hyperparams: beta must be in (0, 1]");
    if (!(lambda >= 0.0) || !(lambda * eta < 1.0))
        throw InvalidInput("hyperparams: lambda must satisfy 0 <= lambda < 1/eta");
    if (!(tau >= 0.0)) throw InvalidInput("hyperparams: tau must be >= 0");
    if (ns_steps < 1) throw InvalidInput("hyperparams: ns_steps must be >= 1");
    if (!(musgd_w_mu >= 0.0) || !(musgd_w_sgd >= 0.0))
        throw InvalidInput("hyperparams: musgd weights must be >= 0");
}

HyperParams from_reference_momentum(double mu, double reference_lr) {
    if (!(mu >= 0.0)) throw InvalidInput("reference momentum must be >= 0");
    HyperParams hp;
    hp.beta = 1.0 / (1.0 + mu);
    hp.eta = reference_lr * hp.beta;
    return hp;
}

OptimizerState init_state(Matrix w0) {
    Matrix m0(w0.rows(), w0.cols());
    return OptimizerState{std::move(w0), std::move(m0), 0};
}

Matrix momentum_update(const Matrix& m_prev, const Matrix& grad, double beta) {
    require_same_shape(m_prev, grad, "momentum_update: shape mismatch");
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidInput("momentum_update: beta must be in (0, 1]");
    Matrix out(m_prev.rows(), m_prev.cols());
    auto od = out.data();
    auto md = m_prev.data();
    auto gd = grad.data();
    for (std::size_t i = 0; i < od.size(); ++i)
        od[i] = beta * gd[i] + (1.0 - beta) * md[i];
    return out;
}

Matrix gradient_mapping(const Matrix& m, double alpha, OrthoMode mode, int ns_steps,
                        linalg::NsCoeffs coeffs) {
    if (alpha == 1.0) return m;

    if (mode == OrthoMode::NewtonSchulz) {
        if (alpha != 0.0)
            throw UnsupportedMode("gradient_mapping: Newton-Schulz only supports alpha in {0, 1}");
        return linalg::newton_schulz(m, ns_steps, coeffs);
    }

    const double norm = linalg::frobenius_norm(m);
    if (alpha == 0.0 && norm == 0.0)
        throw ZeroInput("gradient_mapping: orthogonal factor of the zero matrix");

    const linalg::SvdResult f = linalg::svd(m);
    const double tol = linalg::rank_zero_tol(norm);

    // u * diag(sigma^alpha) * v^T, skipping columns in the numerical nullspace
    Matrix out(m.rows(), m.cols());
    const int r = static_cast<int>(f.sigma.size());
    for (int k = 0; k < r; ++k) {
        if (f.sigma[k] <= tol) continue;
        const double s = (alpha == 0.0) ? 1.0 : std::pow(f.sigma[k], alpha);
        for (int i = 0; i < m.rows(); ++i) {
            const double uis = f.u(i, k) * s;
            for (int j = 0; j < m.cols(); ++j)
                out(i, j) += uis * f.v(j, k);
        }
    }
    return out;
}

double measured_kappa(const Matrix& m) {
    const linalg::SvdResult f = linalg::svd(m);
    return linalg::singular_gap(f.sigma, linalg::rank_zero_tol(linalg::frobenius_norm(m)));
}

double switch_value(const Matrix& m, SwitchMode mode) {
    if (mode == SwitchMode::FrobeniusProxy) return linalg::frobenius_norm(m);
    return measured_kappa(m);
}

namespace {

StepOutcome step_impl(Optimizer which, const OptimizerState& state, const Matrix& grad,
                      const HyperParams& hp) {
    hp.validate();
    require_same_shape(state.w, grad, "step: gradient shape mismatch");
    require_same_shape(state.w, state.m, "step: state shape mismatch");

    Matrix m_new = momentum_update(state.m, grad, hp.beta);
    const double decision = switch_value(m_new, hp.switch_mode);

    Branch branch;
    switch (which) {
        case Optimizer::Sgdm: branch = Branch::Momentum; break;
        case Optimizer::Muon:
        case Optimizer::MuSgd: branch = Branch::Orthogonal; break;
        case Optimizer::MiMuon:
            branch = decision >= hp.tau ? Branch::Orthogonal : Branch::Momentum;
            break;
    }

    Matrix direction(grad.rows(), grad.cols());
    if (which == Optimizer::MuSgd) {
        const Matrix ortho = gradient_mapping(m_new, 0.0, hp.ortho_mode, hp.ns_steps, hp.ns_coeffs);
        auto dd = direction.data();
        auto od = ortho.data();
        auto md = m_new.data();
        for (std::size_t i = 0; i < dd.size(); ++i)
            dd[i] = hp.musgd_w_mu * od[i] + hp.musgd_w_sgd * md[i];
    } else if (branch == Branch::Orthogonal) {
        direction = gradient_mapping(m_new, 0.0, hp.ortho_mode, hp.ns_steps, hp.ns_coeffs);
    } else {
        direction = m_new;
    }

    Matrix w_new(grad.rows(), grad.cols());
    const double decay = 1.0 - hp.eta * hp.lambda;
    {
        auto wn = w_new.data();
        auto w = state.w.data();
        auto d = direction.data();
        for (std::size_t i = 0; i < wn.size(); ++i)
            wn[i] = decay * w[i] - hp.eta * d[i];
    }

    return StepOutcome{OptimizerState{std::move(w_new), std::move(m_new), state.t + 1},
                       branch, decision, std::move(direction)};
}

} // namespace

StepOutcome sgdm_step(const OptimizerState& s, const Matrix& g, const HyperParams& hp) {
    return step_impl(Optimizer::Sgdm, s, g, hp);
}
StepOutcome muon_step(const OptimizerState& s, const Matrix& g, const HyperParams& hp) {
    return step_impl(Optimizer::Muon, s, g, hp);
}
StepOutcome mimuon_step(const OptimizerState& s, const Matrix& g, const HyperParams& hp) {
    return step_impl(Optimizer::MiMuon, s, g, hp);
}
StepOutcome musgd_step(const OptimizerState& s, const Matrix& g, const HyperParams& hp) {
    return step_impl(Optimizer::MuSgd, s, g, hp);
}

StepOutcome step(Optimizer which, const OptimizerState& s, const Matrix& g, const HyperParams& hp) {
    return step_impl(which, s, g, hp);
}

} // namespace matmuon::optim
