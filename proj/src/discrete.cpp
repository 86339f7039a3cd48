#include "wfdiff/discrete.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

namespace wfdiff {

double poisson_kl(double lambda1, double lambda2) {
  if (!(lambda2 > 0.0) || !(lambda1 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
    throw Error(Errc::InvalidRate, "poisson_kl needs lambda1 >= 0 and lambda2 > 0");
  if (lambda1 == 0.0) return lambda2;
  double r = lambda1 / lambda2;
  // λ2 (r log r − r + 1), with the bracket summed without cancellation near r = 1
  const double u = r - 1.0;
  double d = 0.0;
  if (std::abs(u) < 1e-2) {
    // Σ_{n≥2} (−u)^n / (n(n−1))
    double p = u * u;
    for (int n = 2; n < 14; ++n, p *= -u) d += p / (n * (n - 1));
  } else {
    d = r * std::log(r) - r + 1.0;
  }
  return std::max(0.0, lambda2 * d);
}

namespace {

Matrix ratios(const Vector& p) {
  const int B = static_cast<int>(p.size());
  Matrix w(B, B);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < B; ++c) w(b, c) = b == c ? 1.0 : p[b] / p[c];
  return w;
}

}  // namespace

Matrix weight_matrix(const Generator& g, const SimplexPoint& x0_dist, double tau) {
  if (x0_dist.size() != g.alphabet_size()) throw Error(Errc::InvalidArgument, "x0 distribution has wrong size");
  Matrix P = transition_matrix(g, tau);
  const int B = g.alphabet_size();
  Matrix w = Matrix::Zero(B, B);
  for (int c = 0; c < B; ++c) {
    if (x0_dist[c] == 0.0) continue;
    Vector p = P.row(c).transpose();
    if (p.minCoeff() <= 0.0) throw Error(Errc::ZeroProbability, "transition row has a zero entry");
    w += x0_dist[c] * ratios(p);
  }
  return w;
}

std::vector<std::int64_t> sample_multinomial(std::int64_t trials, const Vector& p, Rng& rng) {
  const int B = static_cast<int>(p.size());
  std::vector<std::int64_t> n(B, 0);
  std::int64_t left = trials;
  double mass = p.sum();
  for (int b = 0; b < B - 1 && left > 0; ++b) {
    double q = mass > 0.0 ? std::clamp(p[b] / mass, 0.0, 1.0) : 0.0;
    n[b] = rng.binomial(left, q);
    left -= n[b];
    mass -= p[b];
  }
  n[B - 1] += left;
  return n;
}

namespace {

std::int64_t binomial_inverse(std::int64_t n, double q, double u) {
  if (n <= 0 || q <= 0.0) return 0;
  if (q >= 1.0) return n;
  boost::math::binomial dist(static_cast<double>(n), q);
  double sd = std::sqrt(n * q * (1.0 - q));
  double z = boost::math::quantile(boost::math::normal(), std::clamp(u, 1e-300, 1.0 - 1e-16));
  auto k = static_cast<std::int64_t>(std::llround(std::clamp(n * q + z * sd, 0.0, static_cast<double>(n))));
  while (k < n && boost::math::cdf(dist, static_cast<double>(k)) < u) ++k;
  while (k > 0 && boost::math::cdf(dist, static_cast<double>(k - 1)) >= u) --k;
  return k;
}

}  // namespace

std::vector<std::int64_t> multinomial_by_inversion(std::int64_t trials, const Vector& p, const double* uniforms) {
  const int B = static_cast<int>(p.size());
  std::vector<std::int64_t> n(B, 0);
  std::int64_t left = trials;
  double mass = p.sum();
  for (int b = 0; b < B - 1 && left > 0; ++b) {
    double q = mass > 0.0 ? std::clamp(p[b] / mass, 0.0, 1.0) : 0.0;
    n[b] = binomial_inverse(left, q, uniforms[b]);
    left -= n[b];
    mass -= p[b];
  }
  n[B - 1] += left;
  return n;
}

DiscreteForwardSample sample_forward_discrete(const Generator& g, double tau, int x0, int zeta, Rng& rng) {
  const int B = g.alphabet_size();
  if (zeta < 1) throw Error(Errc::InvalidArgument, "zeta must be >= 1");
  if (x0 < 0 || x0 >= B) throw Error(Errc::InvalidArgument, "token out of range");
  Vector p = transition_matrix(g, tau).row(x0).transpose();
  auto n = sample_multinomial(zeta, p, rng);
  Vector counts(B);
  for (int b = 0; b < B; ++b) counts[b] = static_cast<double>(n[b]) / zeta;
  DiscreteForwardSample s{-1, SimplexPoint(counts), zeta, tau};
  if (zeta == 1)
    for (int b = 0; b < B; ++b)
      if (n[b] == 1) s.token = b;
  return s;
}

double elbo_discrete(const Generator& g, double tau, double tau_rate, int zeta, const SimplexPoint& counts, int x0,
                     const SimplexPoint& x_tilde, Vector* grad) {
  const int B = g.alphabet_size();
  if (counts.size() != B || x_tilde.size() != B) throw Error(Errc::InvalidArgument, "size mismatch");
  Matrix P = transition_matrix(g, tau);
  const Matrix& L = g.rates();
  if (grad) grad->setZero(B);
  double total = 0.0;
  for (int bp = 0; bp < B; ++bp) {
    double weight = zeta * counts[bp];
    if (weight == 0.0) continue;
    for (int b = 0; b < B; ++b) {
      if (b == bp || L(b, bp) == 0.0) continue;
      double w_true = P(x0, b) / P(x0, bp);
      double w_pred = 0.0;
      for (int c = 0; c < B; ++c)
        if (x_tilde[c] > 0.0) w_pred += x_tilde[c] * P(c, b) / P(c, bp);
      double scale = L(b, bp) * tau_rate * weight;
      if (!(w_pred > 0.0)) {
        if (w_true > 0.0) return std::numeric_limits<double>::infinity();
        continue;
      }
      total += scale * poisson_kl(w_true, w_pred);
      if (grad) {
        double dkl = 1.0 - w_true / w_pred;
        for (int c = 0; c < B; ++c) (*grad)[c] += scale * dkl * P(c, b) / P(c, bp);
      }
    }
  }
  return total;
}

SimplexPoint phi_discrete(const Generator& g, double tau, const SimplexPoint& counts, int zeta) {
  const int B = g.alphabet_size();
  Matrix P = transition_matrix(g, tau);
  Vector logl = Vector::Zero(B);
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < B; ++c) {
      double n = std::round(counts[c] * zeta);
      if (n == 0.0) continue;
      logl[b] += P(b, c) > 0.0 ? n * std::log(P(b, c)) : -std::numeric_limits<double>::infinity();
    }
  }
  double mx = logl.maxCoeff();
  if (!std::isfinite(mx)) throw Error(Errc::ZeroProbability, "observation impossible under every token");
  Vector w = (logl.array() - mx).exp();
  return SimplexPoint(w / w.sum());
}

}  // namespace wfdiff
