#include "wfdiff/reverse.hpp"

#include <cmath>

#include "wfdiff/gaussian.hpp"

namespace wfdiff {

Vector reverse_wf_drift(const WFParams& p, const SimplexPoint& z, const ScoreVector& s, bool strict_paper_drift) {
  const int B = p.size();
  const Vector& x = z.weights();
  Vector drift = -0.5 * p.psi * (p.pi.weights() - x);
  if (strict_paper_drift) drift += B * (Vector::Constant(B, 1.0 / B) - x);
  drift += x.cwiseProduct(s) - x * x.dot(s);
  return drift;
}

namespace {

SimplexPoint project(Vector x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] > 1e-12)) x[i] = 1e-12;
  return SimplexPoint(x / x.sum());
}

Vector simplex_noise(const Vector& x, Rng& rng) {
  Vector u = x.cwiseMax(0.0).cwiseSqrt();
  Vector xi(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) xi[i] = rng.normal();
  return u.cwiseProduct(xi - u * u.dot(xi));
}

}  // namespace

SimplexPoint reverse_wf_step(const WFParams& p, const SimplexPoint& z, const ScoreVector& s, double dtau, Rng& rng,
                             bool strict_paper_drift, bool noise) {
  if (!(dtau > 0.0)) throw Error(Errc::InvalidArgument, "dtau must be > 0");
  Vector x = z.weights() + dtau * reverse_wf_drift(p, z, s, strict_paper_drift);
  if (noise) x += std::sqrt(dtau) * simplex_noise(z.weights(), rng);
  return project(std::move(x));
}

Matrix classifier_guidance_term(const Classifier& classifier, const Matrix& x_tilde,
                                const std::vector<Matrix>* jacobians) {
  Matrix g = classifier.gradient(x_tilde);
  if (!jacobians) return g;
  Matrix out(g.rows(), g.cols());
  for (Eigen::Index d = 0; d < g.rows(); ++d) out.row(d) = ((*jacobians)[d].transpose() * g.row(d).transpose()).transpose();
  return out;
}

Matrix wf_prediction_jacobian(const Vector& x_tilde, const Vector& dlog_g) {
  Vector xd = x_tilde.cwiseProduct(dlog_g);
  Matrix J = -x_tilde * xd.transpose();
  J.diagonal() += xd;
  return J;
}

double dilation_inverse(const TimeDilation& dilation, double tau) {
  double lo = 0.0, hi = 1.0;
  if (dilation.tau(hi) <= tau) return hi;
  if (dilation.tau(lo) >= tau) return lo;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    double mid = 0.5 * (lo + hi);
    (dilation.tau(mid) < tau ? lo : hi) = mid;
  }
  return hi;
}

namespace {

/// Decreasing τ values covering [tau_end, tau_start] on a uniform t grid,
/// subdivided so that no increment exceeds max_dtau.
std::vector<double> tau_schedule(const TimeDilation& dilation, double t_end, const ReverseOptions& o) {
  if (o.n_steps < 1) throw Error(Errc::InvalidArgument, "n_steps must be >= 1");
  if (!(o.max_dtau > 0.0)) throw Error(Errc::InvalidArgument, "max_dtau must be > 0");
  std::vector<double> taus{dilation.tau(1.0)};
  for (int i = 1; i <= o.n_steps; ++i) {
    double t = 1.0 - (1.0 - t_end) * i / o.n_steps;
    double next = dilation.tau(t);
    double prev = taus.back();
    int sub = std::max(1, static_cast<int>(std::ceil((prev - next) / o.max_dtau)));
    for (int k = 1; k <= sub; ++k) taus.push_back(prev + (next - prev) * k / sub);
  }
  return taus;
}

}  // namespace

std::vector<int> reverse_wf_sample(const WFParams& p, const Predictor& predictor, int length,
                                   const TimeDilation& dilation, const ReverseOptions& options,
                                   const std::optional<Guidance>& guidance, Rng& rng) {
  const int B = p.size();
  std::vector<SimplexPoint> z;
  for (int d = 0; d < length; ++d) z.push_back(sample_dirichlet(p.psi * p.pi.weights(), rng));
  double t_end = dilation_inverse(dilation, options.wf_tau_end);
  auto taus = tau_schedule(dilation, t_end, options);
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    double tau = taus[i], dtau = tau - taus[i + 1];
    if (!(dtau > 0.0)) continue;
    Matrix phi(length, B), dlog(length, B);
    for (int d = 0; d < length; ++d) {
      Vector logg(B);
      for (int b = 0; b < B; ++b) {
        auto g = evaluate_g(p, tau, b, z[d][b]);
        logg[b] = g.log_g;
        dlog(d, b) = g.dlog_g;
      }
      Vector w = (logg.array() - logg.maxCoeff()).exp();
      phi.row(d) = (w / w.sum()).transpose();
    }
    Matrix x_tilde = predictor.predict(phi);
    Matrix extra = Matrix::Zero(length, B);
    if (guidance) {
      std::vector<Matrix> jac;
      for (int d = 0; d < length; ++d)
        jac.push_back(wf_prediction_jacobian(x_tilde.row(d).transpose(), dlog.row(d).transpose()));
      extra = guidance->scale * classifier_guidance_term(guidance->classifier, x_tilde, &jac);
    }
    for (int d = 0; d < length; ++d) {
      Vector s = stationary_score(p, z[d]) + x_tilde.row(d).transpose().cwiseProduct(dlog.row(d).transpose()) +
                 extra.row(d).transpose();
      z[d] = reverse_wf_step(p, z[d], s, dtau, rng, options.strict_paper_drift);
      for (int c = 0; c < options.corrector; ++c) {
        double eps = 0.1 * dtau;
        const Vector& x = z[d].weights();
        Vector step = x.cwiseProduct(s) - x * x.dot(s) + B * (Vector::Constant(B, 1.0 / B) - x);
        z[d] = project(x + eps * step + std::sqrt(2.0 * eps) * simplex_noise(x, rng));
      }
    }
  }
  std::vector<int> tokens(length);
  for (int d = 0; d < length; ++d) z[d].weights().maxCoeff(&tokens[d]);
  return tokens;
}

std::vector<int> reverse_gaussian_sample(const Embedding& emb, const Predictor& predictor, int length,
                                         const TimeDilation& dilation, const ReverseOptions& options, Rng& rng) {
  const int B = emb.alphabet_size(), r = emb.dimension();
  std::vector<Vector> x(length, Vector(r));
  for (auto& v : x)
    for (int i = 0; i < r; ++i) v[i] = rng.normal();
  auto taus = tau_schedule(dilation, 0.0, options);
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    double tt = taus[i], ts = taus[i + 1];
    if (!(tt > ts)) continue;
    Matrix phi(length, B);
    for (int d = 0; d < length; ++d) phi.row(d) = phi_gaussian(emb, tt, x[d]).weights().transpose();
    Matrix x_tilde = predictor.predict(phi);
    double vt = -std::expm1(-2.0 * tt), vs = -std::expm1(-2.0 * ts);
    double a = std::exp(-(tt - ts));
    double one_minus_a2 = -std::expm1(-2.0 * (tt - ts));
    double sd = std::sqrt(std::max(0.0, vs * one_minus_a2 / vt));
    for (int d = 0; d < length; ++d) {
      Vector mean0 = emb.map_weights(x_tilde.row(d).transpose());
      Vector next = (a * vs / vt) * x[d] + (std::exp(-ts) * one_minus_a2 / vt) * mean0;
      for (int k = 0; k < r; ++k) next[k] += sd * rng.normal();
      x[d] = next;
    }
  }
  std::vector<int> tokens(length);
  for (int d = 0; d < length; ++d) {
    double best = std::numeric_limits<double>::infinity();
    for (int b = 0; b < B; ++b) {
      double dist = (x[d] - emb(b)).squaredNorm();
      if (dist < best) {
        best = dist;
        tokens[d] = b;
      }
    }
  }
  return tokens;
}

std::vector<int> reverse_discrete_sample(const Generator& g, const Predictor& predictor, int length,
                                         const TimeDilation& dilation, const ReverseOptions& options, Rng& rng) {
  const int B = g.alphabet_size();
  const Matrix& L = g.rates();
  const Vector& pi = g.stationary().weights();
  std::vector<int> x(length);
  for (auto& v : x) {
    double u = rng.uniform(), acc = 0.0;
    v = B - 1;
    for (int b = 0; b < B; ++b)
      if ((acc += pi[b]) > u) {
        v = b;
        break;
      }
  }
  auto taus = tau_schedule(dilation, 0.0, options);
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    double tau = taus[i], dtau = tau - taus[i + 1];
    if (!(dtau > 0.0)) continue;
    Matrix P = transition_matrix(g, tau);
    Matrix phi(length, B);
    for (int d = 0; d < length; ++d) {
      Vector col = P.col(x[d]);
      phi.row(d) = (col / col.sum()).transpose();
    }
    Matrix x_tilde = predictor.predict(phi);
    for (int d = 0; d < length; ++d) {
      Vector rate = Vector::Zero(B);
      for (int b = 0; b < B; ++b) {
        if (b == x[d] || L(b, x[d]) == 0.0) continue;
        double w = 0.0;
        for (int c = 0; c < B; ++c)
          if (x_tilde(d, c) > 0.0) w += x_tilde(d, c) * P(c, b) / P(c, x[d]);
        rate[b] = L(b, x[d]) * w;
      }
      double total = rate.sum();
      if (!(total > 0.0)) continue;
      if (rng.uniform() >= -std::expm1(-total * dtau)) continue;
      double u = rng.uniform() * total, acc = 0.0;
      int pick = -1;
      for (int b = 0; b < B; ++b) {
        if (rate[b] <= 0.0) continue;
        pick = b;
        if ((acc += rate[b]) > u) break;
      }
      x[d] = pick;
    }
  }
  return x;
}

}  // namespace wfdiff
