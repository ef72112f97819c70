#pragma once

#include <cstdint>

#include "matmuon/linalg.hpp"
#include "matmuon/matrix.hpp"

namespace matmuon::optim {

enum class SwitchMode { ExactGap, FrobeniusProxy };
enum class OrthoMode { ExactSvd, NewtonSchulz };
enum class Branch { Orthogonal, Momentum };
enum class Optimizer { Sgdm, Muon, MiMuon, MuSgd };

struct HyperParams {
    double eta = 0.02;        // learning rate
    double beta = 1.0 / 1.95; // weight on the new gradient; mu = 0.95 in the reference form
    double lambda = 0.0;      // decoupled weight decay
    double tau = 0.01;        // switch threshold
    SwitchMode switch_mode = SwitchMode::ExactGap;
    OrthoMode ortho_mode = OrthoMode::ExactSvd;
    int ns_steps = 5;
    double musgd_w_mu = 0.7;
    double musgd_w_sgd = 0.4;
    linalg::NsCoeffs ns_coeffs = linalg::kMuonQuintic;

    // eta >= 0, beta in (0,1], lambda >= 0 with lambda*eta < 1, tau > 0,
    // ns_steps >= 1, musgd weights >= 0. Throws InvalidInput.
    void validate() const;
};

// The reference Muon procedure keeps a momentum parameter mu and a raw
// learning rate; the analyzed form here puts beta on the new gradient.
// Documented reparameterization between the two: mu = (1-beta)/beta with
// the step size rescaled by beta, i.e. beta = 1/(1+mu), eta = reference_lr * beta.
HyperParams from_reference_momentum(double mu, double reference_lr);

struct OptimizerState {
    Matrix w;
    Matrix m;
    std::int64_t t = 0;
};

// Momentum starts at zero.
OptimizerState init_state(Matrix w0);

struct StepOutcome {
    OptimizerState new_state;
    Branch branch;
    double gap_value;        // singular gap in ExactGap mode, ||M_t||_F otherwise
    Matrix update_direction; // what was multiplied by eta
};

// beta * grad + (1 - beta) * m_prev
Matrix momentum_update(const Matrix& m_prev, const Matrix& grad, double beta);

// u * diag(sigma^alpha) * v^T with the power taken on nonzero singular
// values only. alpha = 1 returns m without factorizing; alpha = 0 is the
// orthogonal factor (via exact SVD or Newton-Schulz); any other alpha
// requires the exact path.
Matrix gradient_mapping(const Matrix& m, double alpha, OrthoMode mode, int ns_steps,
                        linalg::NsCoeffs coeffs = linalg::kMuonQuintic);

// Decision value tested against tau: the singular gap of m in ExactGap
// mode, its Frobenius norm under the proxy.
double switch_value(const Matrix& m, SwitchMode mode);

// Measured kappa_t of a momentum matrix (gap over the nonzero spectrum).
double measured_kappa(const Matrix& m);

StepOutcome sgdm_step(const OptimizerState& state, const Matrix& grad, const HyperParams& hp);
StepOutcome muon_step(const OptimizerState& state, const Matrix& grad, const HyperParams& hp);
StepOutcome mimuon_step(const OptimizerState& state, const Matrix& grad, const HyperParams& hp);
StepOutcome musgd_step(const OptimizerState& state, const Matrix& grad, const HyperParams& hp);

StepOutcome step(Optimizer which, const OptimizerState& state, const Matrix& grad,
                 const HyperParams& hp);

} // namespace matmuon::optim
