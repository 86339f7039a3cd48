#pragma once

#include "wfdiff/core.hpp"
#include "wfdiff/predictor.hpp"
#include "wfdiff/rng.hpp"

namespace wfdiff {

/// e^{−τ} emb(x0) + √(1 − e^{−2τ}) N(0, I).
Vector sample_forward_gaussian(const Embedding& emb, double tau, int x0, Rng& rng);

/// τ̇ e^{−2τ} / (1 − e^{−2τ})².
double gaussian_loss_weight(double tau, double tau_rate);

/// weight · ‖emb(x0) − Σ_b x̃_b emb(b)‖². If `grad` is given it receives ∂L/∂x̃0.
double elbo_gaussian(const Embedding& emb, double tau, double tau_rate, int x0, const SimplexPoint& x_tilde,
                     Vector* grad = nullptr);

/// softmax_b of −‖point − e^{−τ} emb(b)‖² / (2(1 − e^{−2τ})).
SimplexPoint phi_gaussian(const Embedding& emb, double tau, const Vector& point);

struct SingularityRow {
  double t = 0.0;
  double elbo_raw = 0.0;
  double elbo_hollow = 0.0;
  double stderr_raw = 0.0;
  double stderr_hollow = 0.0;
};

/// Monte-Carlo E[L(t)] per grid point for a raw predictor and a hollow one,
/// with sequences drawn from p0. Sample i of point j uses stream (seed, j·n + i).
std::vector<SingularityRow> gaussian_singularity_profile(const Embedding& emb, const TimeDilation& dilation,
                                                         const JointTable& p0, const Predictor& raw,
                                                         const Predictor& hollow, const std::vector<double>& t_grid,
                                                         int n_samples, std::uint64_t seed);

}  // namespace wfdiff
