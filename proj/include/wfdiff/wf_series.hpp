#pragma once

#include <span>
#include <vector>

namespace wfdiff {

enum class Precision { Standard, Extended };

inline const char* precision_name(Precision p) {
  return p == Precision::Standard ? "standard" : "extended";
}

struct SeriesResult {
  double value = 0.0;
  double condition_number = 1.0;
  Precision precision_used = Precision::Standard;
  int terms_used = 0;
  /// False when the last term was not negligible (truncated sums only).
  bool converged = true;
};

/// η above which a standard-precision sum is recomputed: 1e-6 · 2^52.
constexpr double kEscalationThreshold = 1e-6 * 4503599627370496.0;
constexpr int kDefaultKmax = 80;
constexpr int kReferenceKmax = 1000;
/// Below this τ the series are not used; callers switch to the low-t path.
constexpr double kSeriesRegimeTau = 0.05;

/// Decimal digits used for extended precision. Read once from
/// WFDIFF_PRECISION_DIGITS (default 50, minimum 50).
unsigned extended_precision_digits();

/// Direct sum Σ_{j=0}^{k} (−k)_j (b)_j / (c)_j x^j / j!.
double hypergeom_terminating(int k, double b, double c, double x);

/// Σ|a| / max(|Σa|, smallest normal).
double condition_estimate(std::span<const double> terms);

/// G_ψ(τ, x0, x) = 1 + Σ_k (−1)^k a_k with x = v_{x0}. Escalates to extended
/// precision when η exceeds the threshold. Throws Unconverged.
SeriesResult series_G(double psi, double pi_x0, double x, double tau, int kmax = kDefaultKmax);
/// F_ψ(τ, x0, x) = 1 + Σ_k (−1)^k b_k, so that ∂G/∂x = e^{−ψτ/2}(ψ+1)/π_{x0} F.
SeriesResult series_F(double psi, double pi_x0, double x, double tau, int kmax = kDefaultKmax);

/// Extended-precision evaluations (no escalation decision involved).
SeriesResult series_G_extended(double psi, double pi_x0, double x, double tau, int kmax = kReferenceKmax);
SeriesResult series_F_extended(double psi, double pi_x0, double x, double tau, int kmax = kReferenceKmax);

/// The partial sum of G to kmax at the given precision with no escalation
/// and no convergence error (used by diagnostic sweeps).
SeriesResult series_G_truncated(double psi, double pi_x0, double x, double tau, int kmax, Precision precision);

/// P(A(ψ, τ) = m) by the alternating coefficient series.
SeriesResult ancestral_pmf(double psi, double tau, int m, int kmax = kReferenceKmax);
SeriesResult ancestral_pmf_extended(double psi, double tau, int m, int kmax = kReferenceKmax);

/// log c_{km} = log[(2k+ψ−1)(ψ+m)_{k−1}/(m!(k−m)!)] − k(k+ψ−1)τ/2, k ≥ m.
double log_ancestral_coefficient(double psi, double tau, int k, int m);

/// Partial sums S_n = Σ_{i≤n} (−1)^i c_{m+i,m} of the pmf series for one m,
/// computed until the terms are negligible. For n ≥ monotone_from the true
/// p(m) lies between S_n and S_{n+1}.
struct AncestralEnvelope {
  std::vector<double> partial_sums;
  int monotone_from = 0;
  double condition_number = 1.0;
  /// Bound on the absolute rounding error of each partial sum.
  double abs_error = 0.0;
  Precision precision_used = Precision::Standard;
};

AncestralEnvelope ancestral_envelope(double psi, double tau, int m, Precision precision);

/// Standard precision first; recomputed in extended precision when the
/// condition number exceeds the escalation threshold.
AncestralEnvelope ancestral_envelope(double psi, double tau, int m);

enum class SeriesKind { G, F, AncestralPmf };

struct SeriesRequest {
  SeriesKind kind = SeriesKind::G;
  double psi = 1.0;
  double pi_x0 = 1.0;   // unused for AncestralPmf
  double x = 0.0;       // unused for AncestralPmf
  double tau = 1.0;
  int m = 0;            // AncestralPmf only
  int kmax = kDefaultKmax;
};

/// Evaluates a batch. Standard-precision work is split across `workers`
/// threads; requests that need escalation go through a bounded queue served
/// by the same number of workers. Results are written by request index, so
/// the output does not depend on scheduling.
std::vector<SeriesResult> evaluate_series_batch(const std::vector<SeriesRequest>& requests,
                                                unsigned workers = 0);

}  // namespace wfdiff
