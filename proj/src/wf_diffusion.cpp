#include "wfdiff/wf_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace wfdiff {

namespace {

constexpr double kMinComponent = 1e-300;

/// log Φ(z), accurate far into the lower tail.
double log_normal_cdf(double z) {
  if (z > -37.0) return std::log(0.5 * boost::math::erfc(-z / std::numbers::sqrt2));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2));
}

/// log(Φ(b) − Φ(a)) for a < b.
double log_normal_interval(double a, double b) {
  if (a > 0.0) return log_normal_interval(-b, -a);
  const double hi = log_normal_cdf(b);
  const double lo = log_normal_cdf(a);
  return hi + std::log1p(-std::exp(lo - hi));
}

double log_rising(double a, int n) { return std::lgamma(a + n) - std::lgamma(a); }

int argmax(const Vector& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

WFParams::WFParams(double psi_, SimplexPoint pi_) : psi(psi_), pi(std::move(pi_)) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!pi.strictly_positive()) throw Error(Errc::InvalidPi, "pi must be strictly positive");
}

GriffithsMoments griffiths_moments(double psi, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  const double beta = 0.5 * (psi - 1.0) * tau;
  if (std::abs(beta) < 1e-10) return {2.0 / tau, 2.0 / (3.0 * tau)};
  const double eta = beta / std::expm1(beta);
  const double mean = 2.0 * eta / tau;
  const double var =
      (2.0 * eta / tau) * std::pow(eta + beta, 2) * (1.0 + eta / (eta + beta) - 2.0 * eta) / (beta * beta);
  return {mean, var};
}

double griffiths_log_pmf(const GriffithsMoments& g, int m) {
  if (m < 0) return -std::numeric_limits<double>::infinity();
  const double sd = std::sqrt(g.variance);
  const double b = (m + 0.5 - g.mean) / sd;
  if (m == 0) return log_normal_cdf(b);
  return log_normal_interval((m - 0.5 - g.mean) / sd, b);
}

int sample_ancestral_griffiths(double psi, double tau, Rng& rng) {
  const auto g = griffiths_moments(psi, tau);
  const double z = g.mean + std::sqrt(g.variance) * rng.normal();
  return static_cast<int>(std::max(0.0, std::floor(z + 0.5)));
}

AncestralSampler::AncestralSampler(double psi, double tau) : psi_(psi), tau_(tau) {
  if (!(psi > 0.0)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(tau >= kSeriesRegimeTau))
    throw Error(Errc::InvalidArgument, "the exact ancestral sampler needs tau >= 0.05 (use the Griffiths sampler below)");
}

const AncestralEnvelope& AncestralSampler::envelope(int m) {
  while (static_cast<int>(envelopes_.size()) <= m)
    envelopes_.push_back(
        ancestral_envelope(psi_, tau_, static_cast<int>(envelopes_.size()), Precision::Standard));
  return envelopes_[m];
}

int AncestralSampler::operator()(Rng& rng) { return invert(rng.uniform_open()); }

int AncestralSampler::invert(double u) {
  constexpr long kBudget = 1000000;
  int top = 0;    // candidate value M
  int level = 0;  // refinement level shared by all m ≤ M
  for (long it = 0; it < kBudget; ++it) {
    double lo = 0.0;
    double hi = 0.0;
    double err = 0.0;
    bool exhausted = true;
    for (int m = 0; m <= top; ++m) {
      const auto& env = envelope(m);
      const auto& s = env.partial_sums;
      const std::size_t n = static_cast<std::size_t>(env.monotone_from) + 2 * static_cast<std::size_t>(level);
      if (n + 1 < s.size()) {
        lo += std::min(s[n], s[n + 1]);
        hi += std::max(s[n], s[n + 1]);
        exhausted = false;
      } else {
        lo += s.back();
        hi += s.back();
      }
      err += env.abs_error;
    }
    if (lo - err > u) return top;
    if (hi + err < u) {
      if (envelope(top).partial_sums.front() < 1e-300 && top > 0) {
        // No representable mass beyond M: tighten the brackets instead, and
        // if they are already exact u lies in the rounding gap of the total.
        if (exhausted) return top - 1;
        ++level;
        continue;
      }
      ++top;
      continue;
    }
    if (lo > u || hi < u || exhausted) {
      // Decided only up to rounding error: recompute in extended precision.
      bool escalated = false;
      for (int m = 0; m <= top; ++m) {
        if (envelopes_[m].precision_used == Precision::Standard && envelopes_[m].abs_error > 1e-17) {
          envelopes_[m] = ancestral_envelope(psi_, tau_, m, Precision::Extended);
          escalated = true;
        }
      }
      if (!escalated) {
        if (lo > u || (exhausted && u <= hi)) return top;
        ++top;
      }
      continue;
    }
    ++level;
  }
  throw Error(Errc::EnvelopeStall, "ancestral sampler exceeded its iteration budget");
}

int sample_ancestral_exact(double psi, double tau, Rng& rng) {
  AncestralSampler sampler(psi, tau);
  return sampler(rng);
}

SimplexPoint sample_dirichlet(const Vector& alpha, Rng& rng) {
  const auto n = alpha.size();
  Vector log_g(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    if (alpha[b] >= 1.0) {
      log_g[b] = std::log(rng.gamma(alpha[b]));
    } else {
      // Gamma(a) = Gamma(a + 1) U^{1/a}
      log_g[b] = std::log(rng.gamma(alpha[b] + 1.0)) + std::log(rng.uniform_open()) / alpha[b];
    }
  }
  const double top = log_g.maxCoeff();
  Vector w = (log_g.array() - top).exp().matrix();
  w /= w.sum();
  w = w.cwiseMax(kMinComponent);
  w /= w.sum();
  return SimplexPoint(std::move(w));
}

WFForwardSample sample_forward_wf(const WFParams& p, double tau, int x0, Rng& rng, double threshold) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (x0 < 0 || x0 >= p.size()) throw Error(Errc::InvalidArgument, "token out of range");
  const int m = tau >= threshold ? sample_ancestral_exact(p.psi, tau, rng)
                                 : sample_ancestral_griffiths(p.psi, tau, rng);
  Vector alpha = p.psi * p.pi.weights();
  alpha[x0] += m;
  return WFForwardSample{sample_dirichlet(alpha, rng), m};
}

GEvaluation evaluate_g(const WFParams& p, double tau, int b, double vb, double threshold) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  const double pib = p.pi[b];
  GEvaluation out;
  if (tau >= threshold) {
    const auto g = series_G(p.psi, pib, vb, tau);
    if (!(g.value > 0.0)) throw Error(Errc::NonPositiveG, "G evaluated to a nonpositive value");
    const auto f = series_F(p.psi, pib, vb, tau);
    out.log_g = std::log(g.value);
    out.dlog_g = std::exp(-0.5 * p.psi * tau) * (p.psi + 1.0) / pib * f.value / g.value;
    out.condition_number = std::max(g.condition_number, f.condition_number);
    out.precision_used = (g.precision_used == Precision::Extended || f.precision_used == Precision::Extended)
                             ? Precision::Extended
                             : Precision::Standard;
    return out;
  }
  // Dirichlet mixture over the Griffiths law of m.
  const auto moments = griffiths_moments(p.psi, tau);
  const int m_max = static_cast<int>(std::ceil(moments.mean + 20.0 * std::sqrt(moments.variance) + 20.0));
  const double log_v = std::log(vb);
  const double psi_pib = p.psi * pib;
  std::vector<double> logs(static_cast<std::size_t>(m_max) + 1);
  double top = -std::numeric_limits<double>::infinity();
  for (int m = 0; m <= m_max; ++m) {
    logs[m] = griffiths_log_pmf(moments, m) + log_rising(p.psi, m) - log_rising(psi_pib, m) + m * log_v;
    top = std::max(top, logs[m]);
  }
  double total = 0.0;
  double mean_m = 0.0;
  for (int m = 0; m <= m_max; ++m) {
    const double w = std::exp(logs[m] - top);
    total += w;
    mean_m += m * w;
  }
  out.log_g = top + std::log(total);
  out.dlog_g = mean_m / total / vb;
  return out;
}

double wf_log_density(const WFParams& p, double tau, int x0, const SimplexPoint& v, double threshold) {
  if (v.size() != p.size()) throw Error(Errc::InvalidArgument, "dimension mismatch");
  double log_dir = std::lgamma(p.psi);
  for (int b = 0; b < p.size(); ++b) {
    const double a = p.psi * p.pi[b];
    log_dir += (a - 1.0) * std::log(v[b]) - std::lgamma(a);
  }
  return log_dir + evaluate_g(p, tau, x0, v[x0], threshold).log_g;
}

Vector stationary_score(const WFParams& p, const SimplexPoint& v) {
  return (p.psi * p.pi.weights().array() - 1.0).matrix().cwiseQuotient(v.weights());
}

ScoreVector score_given_x0(const WFParams& p, double tau, int x0, const SimplexPoint& v, double threshold) {
  ScoreVector s = stationary_score(p, v);
  s[x0] += evaluate_g(p, tau, x0, v[x0], threshold).dlog_g;
  return s;
}

namespace {

/// The x0-dependent part of the score under a prediction: s − c.
Vector prediction_pull(const WFParams& p, double tau, const SimplexPoint& x_tilde, const SimplexPoint& v,
                       bool hollow, double threshold) {
  const int n = p.size();
  Vector pull = Vector::Zero(n);
  if (!hollow) {
    for (int b = 0; b < n; ++b)
      if (x_tilde[b] > 0.0) pull[b] = x_tilde[b] * evaluate_g(p, tau, b, v[b], threshold).dlog_g;
    return pull;
  }
  // Posterior weights normalize(q ∘ G) computed in log space.
  Vector log_w = Vector::Constant(n, -std::numeric_limits<double>::infinity());
  Vector dlog = Vector::Zero(n);
  for (int b = 0; b < n; ++b) {
    if (x_tilde[b] <= 0.0) continue;
    const auto g = evaluate_g(p, tau, b, v[b], threshold);
    log_w[b] = std::log(x_tilde[b]) + g.log_g;
    dlog[b] = g.dlog_g;
  }
  const double top = log_w.maxCoeff();
  Vector w = (log_w.array() - top).exp().matrix();
  w /= w.sum();
  return w.cwiseProduct(dlog);
}

}  // namespace

ScoreVector score_given_prediction(const WFParams& p, double tau, const SimplexPoint& x_tilde,
                                   const SimplexPoint& v, bool hollow, double threshold) {
  if (x_tilde.size() != p.size() || v.size() != p.size()) throw Error(Errc::InvalidArgument, "dimension mismatch");
  return stationary_score(p, v) + prediction_pull(p, tau, x_tilde, v, hollow, threshold);
}

SimplexPoint phi_wf(const WFParams& p, double tau, const SimplexPoint& v, double threshold) {
  const int n = p.size();
  Vector log_g(n);
  for (int b = 0; b < n; ++b) log_g[b] = evaluate_g(p, tau, b, v[b], threshold).log_g;
  Vector w = (log_g.array() - log_g.maxCoeff()).exp().matrix();
  return SimplexPoint(w / w.sum());
}

double elbo_wf(double tau_rate, const SimplexPoint& v, const ScoreVector& s_true, const ScoreVector& s_pred) {
  const Vector delta = s_true - s_pred;
  const double centre = v.weights().dot(delta);
  const double quad = v.weights().dot((delta.array() - centre).square().matrix());
  return 0.5 * tau_rate * quad;
}

double saddle_mean(double psi, double tau, double p) {
  const auto g = griffiths_moments(psi, tau);
  return 0.5 * ((g.mean - (psi - 1.0)) +
                std::sqrt(std::pow(g.mean + (psi - 1.0), 2) + 4.0 * (1.0 - p) * psi * g.variance));
}

double elbo_wf_low_t(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v, int x0) {
  const int b_star = argmax(v.weights());
  const double prob = std::min(p.pi[x0], p.pi[b_star]);
  const double m = saddle_mean(p.psi, tau, prob);
  return 2.0 * tau_rate * m * m / v[x0];
}

double wf_loss(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v, int x0,
               const SimplexPoint& x_tilde, bool hollow, double threshold) {
  if (tau < threshold) {
    if (argmax(v.weights()) == x0) return 0.0;
    return elbo_wf_low_t(p, tau, tau_rate, v, x0);
  }
  // Compare the x0-dependent parts directly; c(v) cancels.
  Vector truth = Vector::Zero(p.size());
  truth[x0] = evaluate_g(p, tau, x0, v[x0], threshold).dlog_g;
  const Vector pred = prediction_pull(p, tau, x_tilde, v, hollow, threshold);
  return elbo_wf(tau_rate, v, truth, pred);
}

}  // namespace wfdiff
