#pragma once

#include "wfdiff/core.hpp"
#include "wfdiff/rng.hpp"
#include "wfdiff/wf_series.hpp"

namespace wfdiff {

/// Parent-independent mutation specification (ψ, π).
struct WFParams {
  WFParams(double psi, SimplexPoint pi);
  double psi;
  SimplexPoint pi;
  int size() const { return pi.size(); }
};

using ScoreVector = Vector;

struct GriffithsMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Normal approximation to A(ψ, τ) at small τ.
GriffithsMoments griffiths_moments(double psi, double tau);

/// P(max(0, ⌊Z + 0.5⌋) = m) for Z ~ N(mean, variance); log scale.
double griffiths_log_pmf(const GriffithsMoments& g, int m);

int sample_ancestral_griffiths(double psi, double tau, Rng& rng);

/// Exact draws from A(ψ, τ) by bracketing the CDF with the alternating
/// pmf envelopes. Envelopes are cached, so reuse one sampler for many draws
/// at a fixed (ψ, τ). Requires τ ≥ 0.05 (InvalidArgument otherwise).
/// Throws EnvelopeStall.
class AncestralSampler {
 public:
  AncestralSampler(double psi, double tau);
  int operator()(Rng& rng);
  /// The draw for a given uniform u ∈ (0, 1).
  int invert(double u);

 private:
  const AncestralEnvelope& envelope(int m);
  double psi_, tau_;
  std::vector<AncestralEnvelope> envelopes_;
};

int sample_ancestral_exact(double psi, double tau, Rng& rng);

struct WFForwardSample {
  SimplexPoint point;
  int m = 0;
};

/// m ~ A(ψ, τ) (exact at τ ≥ threshold, Griffiths below), then
/// x_t ~ Dirichlet(ψπ + m e_{x0}). Components are clamped to ≥ 1e-300.
WFForwardSample sample_forward_wf(const WFParams& p, double tau, int x0, Rng& rng,
                                  double threshold = kSeriesRegimeTau);

/// Dirichlet(α) draw computed in log space so small shapes do not underflow.
SimplexPoint sample_dirichlet(const Vector& alpha, Rng& rng);

/// log G_ψ(τ, b, v_b) and ∂_{v_b} log G. Series evaluation at τ ≥ threshold,
/// Griffiths-weighted Dirichlet mixture Σ_m p(m)(ψ)_m/(ψπ_b)_m v_b^m below.
struct GEvaluation {
  double log_g = 0.0;
  double dlog_g = 0.0;
  double condition_number = 1.0;
  Precision precision_used = Precision::Standard;
};
GEvaluation evaluate_g(const WFParams& p, double tau, int b, double vb, double threshold = kSeriesRegimeTau);

/// log Dirichlet(ψπ)(v) + log G_ψ(τ, x0, v). Throws NonPositiveG.
double wf_log_density(const WFParams& p, double tau, int x0, const SimplexPoint& v,
                      double threshold = kSeriesRegimeTau);

/// (ψπ − 1)/v.
Vector stationary_score(const WFParams& p, const SimplexPoint& v);

ScoreVector score_given_x0(const WFParams& p, double tau, int x0, const SimplexPoint& v,
                           double threshold = kSeriesRegimeTau);

/// hollow = false: Σ_b x̃_b s(v | b). hollow = true: x̃ is the base
/// prediction q and the result is the score of Σ_b q_b p(v | b), i.e.
/// s_b = c_b + w_b q_b F_b / Σ_b' q_b' G_b' with π_b in each weight.
ScoreVector score_given_prediction(const WFParams& p, double tau, const SimplexPoint& x_tilde,
                                   const SimplexPoint& v, bool hollow, double threshold = kSeriesRegimeTau);

/// φ_b ∝ G_ψ(τ, b, v_b), the normalized likelihood p(v | x0 = b).
SimplexPoint phi_wf(const WFParams& p, double tau, const SimplexPoint& v, double threshold = kSeriesRegimeTau);

/// (τ̇/2) Δ^T (diag v − v v^T) Δ with Δ = s_true − s_pred.
double elbo_wf(double tau_rate, const SimplexPoint& v, const ScoreVector& s_true, const ScoreVector& s_pred);

/// ((μ − (ψ−1)) + √((μ + (ψ−1))² + 4(1−p)ψσ²))/2 with Griffiths (μ, σ²).
double saddle_mean(double psi, double tau, double p);

/// 2 τ̇ Ẽm² / v_{x0} with p = min(π_{x0}, π_{b*}), b* = argmax v.
double elbo_wf_low_t(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v, int x0);

/// Per-position simplicial loss. At τ ≥ threshold: elbo_wf between the true
/// score and the score under the prediction. Below: the prediction is δ_{b*},
/// so the loss is 0 when x0 = b* and the low-t bound otherwise.
double wf_loss(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v, int x0,
               const SimplexPoint& x_tilde, bool hollow, double threshold = kSeriesRegimeTau);

}  // namespace wfdiff
