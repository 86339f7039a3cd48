#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "wfdiff/core.hpp"
#include "wfdiff/predictor.hpp"
#include "wfdiff/rng.hpp"
#include "wfdiff/wf_diffusion.hpp"

namespace wfdiff {

/// Expected reverse-time increment per unit Δτ:
/// −ψ/2(π − z) + B(𝟙/B − z) + (diag z − z z^T) s. The middle term is
/// dropped when strict_paper_drift is false.
Vector reverse_wf_drift(const WFParams& p, const SimplexPoint& z, const ScoreVector& s, bool strict_paper_drift = true);

/// One Euler-Maruyama step backwards in τ, projected onto the simplex
/// (negatives clamped to 1e-12, renormalized). With noise = false the
/// increment is drift · Δτ.
SimplexPoint reverse_wf_step(const WFParams& p, const SimplexPoint& z, const ScoreVector& s, double dtau, Rng& rng,
                             bool strict_paper_drift = true, bool noise = true);

/// log p(y | x̃0) for a D × B prediction, with its gradient in x̃0.
struct Classifier {
  std::function<double(const Matrix&)> log_prob;
  std::function<Matrix(const Matrix&)> gradient;
};

/// Row d: J_d^T ∇_{x̃_d} log f, with J_d = ∂x̃_d/∂x_t^d (identity when
/// `jacobians` is null).
Matrix classifier_guidance_term(const Classifier& classifier, const Matrix& x_tilde,
                                const std::vector<Matrix>* jacobians = nullptr);

/// ∂x̃/∂v for x̃ ∝ q ∘ G(v) with q held fixed: diag(x̃∘d) − x̃ (x̃∘d)^T
/// where d_b = ∂ log G_b / ∂v_b.
Matrix wf_prediction_jacobian(const Vector& x_tilde, const Vector& dlog_g);

struct Guidance {
  Classifier classifier;
  double scale = 1.0;
};

struct ReverseOptions {
  int n_steps = 1000;
  /// Largest τ increment per integration substep.
  double max_dtau = 0.05;
  bool strict_paper_drift = true;
  /// Langevin corrector steps after each predictor step (WF only).
  int corrector = 0;
  /// WF integration stops at this τ and returns the argmax.
  double wf_tau_end = kSeriesRegimeTau;
};

/// Smallest t with dilation.tau(t) ≥ tau, by bisection.
double dilation_inverse(const TimeDilation& dilation, double tau);

/// Reverse SDE from Dirichlet(ψπ) per position; `predictor` maps φ to the
/// (hollow-wrapped) prediction used in the score.
std::vector<int> reverse_wf_sample(const WFParams& p, const Predictor& predictor, int length,
                                   const TimeDilation& dilation, const ReverseOptions& options,
                                   const std::optional<Guidance>& guidance, Rng& rng);

/// Ancestral OU reversal with emb(x̃0) as the mean estimate; the final token
/// is the nearest embedding.
std::vector<int> reverse_gaussian_sample(const Embedding& emb, const Predictor& predictor, int length,
                                         const TimeDilation& dilation, const ReverseOptions& options, Rng& rng);

/// τ-leaping on r(x → b) = ℒ_{b→x} ŵ(x̃0)_{b x}, started from π.
std::vector<int> reverse_discrete_sample(const Generator& g, const Predictor& predictor, int length,
                                         const TimeDilation& dilation, const ReverseOptions& options, Rng& rng);

}  // namespace wfdiff
