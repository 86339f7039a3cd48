#pragma once

#include <cstdint>
#include <vector>

#include "wfdiff/core.hpp"
#include "wfdiff/rng.hpp"
#include "wfdiff/wf_diffusion.hpp"

namespace wfdiff {

/// Enumeration of count vectors of length B summing to ζ, in
/// lexicographic order of the counts.
class CountSpace {
 public:
  CountSpace(int alphabet, int zeta);
  int alphabet() const { return alphabet_; }
  int zeta() const { return zeta_; }
  int size() const { return static_cast<int>(states_.size()); }
  const std::vector<int>& state(int index) const { return states_[index]; }
  int index(const std::vector<int>& counts) const;
  /// ζ copies of `token`.
  int pure(int token) const;

 private:
  int alphabet_, zeta_;
  std::vector<std::vector<int>> states_;
};

/// Generator on CountSpace(B, ζ): mutation moves n → n − e_b + e_{b'} at
/// rate n_b ℒ_{bb'}, plus (optionally) whole-generation replacement at rate
/// ζ with Multinomial(ζ, n/ζ) weights. Requires ζ ≤ 8 and B ≤ 3; throws
/// StateSpaceTooLarge otherwise.
Matrix wf_ctmc_generator(const Generator& g, int zeta, bool reproduction = true);

/// Row `start` of exp(τ Q).
Vector ctmc_marginal(const Matrix& q, int start, double tau);

/// Event-driven simulation of the chain for time τ.
int simulate_ctmc(const Matrix& q, int start, double tau, Rng& rng);

/// Exact mutation-only marginal: counts of ζ independent chains started at
/// the counts in `start`, as a distribution over the CountSpace.
Vector product_form_marginal(const Generator& g, const CountSpace& space, int start, double tau);

struct ConvergenceCell {
  int zeta = 0;
  double t = 0.0;
  double metric = 0.0;
  double mc_error = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceCell> cells;
  /// Least-squares slope of log metric against log ζ, averaged over t.
  double decay_slope = 0.0;
};

struct GaussianLimitOptions {
  int n_samples = 10000;
  std::uint64_t seed = 0;
};

/// Energy distance between Q_1 x_t^ζ (ζ-population under τ^ζ, rescaled)
/// and N(e^{−τ_t} emb(x0), (1 − e^{−2τ_t}) I) per (ζ, t) cell. The
/// generator is rescaled so that λ_1 = 1. All ζ at grid point j share the
/// uniforms of stream (seed, j) (multinomials by CDF inversion).
ConvergenceReport gaussian_limit_experiment(const Generator& g, const TimeDilation& dilation, int x0,
                                            const std::vector<double>& t_grid, const std::vector<int>& zeta_grid,
                                            const GaussianLimitOptions& options);

/// |corr| between x0 and the projection onto each non-dominant eigenspace
/// (columns), for x0 drawn uniformly; one row per ζ.
Matrix nondominant_correlation(const Generator& g, const TimeDilation& dilation, double t,
                               const std::vector<int>& zeta_grid, int n_samples, std::uint64_t seed);

/// Population ELBO (Alg. 3 form at ζ) in expectation over x_t, and the
/// Gaussian ELBO it converges to, at base time t.
struct ElboLimitPoint {
  int zeta = 0;
  double population = 0.0;
  double gaussian = 0.0;
  double relative_gap = 0.0;
};
std::vector<ElboLimitPoint> gaussian_elbo_limit(const Generator& g, const TimeDilation& dilation, double t, int x0,
                                                const SimplexPoint& x_tilde, const std::vector<int>& zeta_grid);

/// L^ζ from the count-state chain with mutation ℒ = (ψ/2)(𝟙π^T − I) and
/// reproduction at rate ζ, at the lattice point nearest v, against elbo_wf
/// at the same point.
struct WFLimitPoint {
  int zeta = 0;
  SimplexPoint lattice_point;
  double discrete = 0.0;
  double continuum = 0.0;
  double gap = 0.0;
};
std::vector<WFLimitPoint> wf_limit_experiment(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v,
                                              int x0, const SimplexPoint& x_tilde, const std::vector<int>& zeta_grid);

/// Finite-ζ loss of the count chain at a given state, with weights from
/// exact marginals started at the pure states.
double wf_ctmc_loss(const Matrix& q, const CountSpace& space, double tau, double tau_rate, int state, int x0,
                    const SimplexPoint& x_tilde);

struct CounterexampleResult {
  std::vector<double> gaussian_transitions;
  std::vector<double> discrete_transitions;
  /// Fraction of paths in the x0 state at the marginal check time, per process.
  double gaussian_same_fraction = 0.0;
  double discrete_same_fraction = 0.0;
  double marginal_check_tau = 0.0;
};

/// Sign of the OU process from emb(x0) = +1 versus the symmetric two-state
/// chain with hazard chosen to match P(same sign) at every τ, on a τ grid of
/// step dt over [0, tau_max]. Path i uses stream (seed, i).
CounterexampleResult argmax_counterexample(double dt, int n_paths, std::uint64_t seed, double tau_max = 2.0,
                                           double marginal_tau = 1.0);

}  // namespace wfdiff
