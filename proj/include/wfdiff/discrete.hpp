#pragma once

#include <cstdint>
#include <limits>

#include "wfdiff/core.hpp"
#include "wfdiff/rng.hpp"

namespace wfdiff {

/// λ1 log(λ1/λ2) − λ1 + λ2 with 0 log 0 = 0. Throws InvalidRate.
double poisson_kl(double lambda1, double lambda2);

/// ŵ(b)_{bb'} = p_b / p_{b'} with p = x0^T e^{τℒ}, mixed over x0_dist.
/// Throws ZeroProbability if a needed probability vanishes.
Matrix weight_matrix(const Generator& g, const SimplexPoint& x0_dist, double tau);

struct DiscreteForwardSample {
  int token = -1;         // set when ζ = 1
  SimplexPoint counts;    // normalized by ζ
  int zeta = 1;
  double tau = 0.0;
};

/// n ~ Multinomial(trials, p) via B−1 sequential binomials.
std::vector<std::int64_t> sample_multinomial(std::int64_t trials, const Vector& p, Rng& rng);

/// Same decomposition with each binomial drawn by CDF inversion of the
/// given uniforms (B−1 of them). Draws for different p from the same
/// uniforms are monotonically coupled.
std::vector<std::int64_t> multinomial_by_inversion(std::int64_t trials, const Vector& p, const double* uniforms);

DiscreteForwardSample sample_forward_discrete(const Generator& g, double tau, int x0, int zeta, Rng& rng);

/// Σ_{b≠b'} ℒ_{b→b'} τ̇ ζ x_{t,b'} D(ŵ(x0)_{bb'} || ŵ(x̃0)_{bb'}). Returns
/// +∞ when x̃0 gives zero rate where x0 does not. `counts` is normalized by
/// ζ. If `grad` is given it receives ∂L/∂x̃0.
double elbo_discrete(const Generator& g, double tau, double tau_rate, int zeta, const SimplexPoint& counts,
                     int x0, const SimplexPoint& x_tilde, Vector* grad = nullptr);

/// Evidence φ_b ∝ p(x_t | x0 = b): column x_t of e^{τℒ} at ζ = 1, the
/// multinomial likelihood Π_c P_{bc}^{n_c} otherwise.
SimplexPoint phi_discrete(const Generator& g, double tau, const SimplexPoint& counts, int zeta);

}  // namespace wfdiff
