#include "wfdiff/gaussian.hpp"

#include <cmath>

namespace wfdiff {

Vector sample_forward_gaussian(const Embedding& emb, double tau, int x0, Rng& rng) {
  if (tau < 0.0) throw Error(Errc::InvalidArgument, "tau must be >= 0");
  const int r = emb.dimension();
  double decay = std::exp(-tau);
  double sd = std::sqrt(-std::expm1(-2.0 * tau));
  Vector x = decay * emb(x0);
  for (int i = 0; i < r; ++i) x[i] += sd * rng.normal();
  return x;
}

double gaussian_loss_weight(double tau, double tau_rate) {
  double e2 = std::exp(-2.0 * tau);
  double v = -std::expm1(-2.0 * tau);
  return tau_rate * e2 / (v * v);
}

double elbo_gaussian(const Embedding& emb, double tau, double tau_rate, int x0, const SimplexPoint& x_tilde,
                     Vector* grad) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be > 0");
  double w = gaussian_loss_weight(tau, tau_rate);
  Vector diff = emb(x0) - emb(x_tilde);
  if (grad) *grad = -2.0 * w * (emb.vectors() * diff);
  return w * diff.squaredNorm();
}

SimplexPoint phi_gaussian(const Embedding& emb, double tau, const Vector& point) {
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be > 0");
  const int B = emb.alphabet_size();
  double decay = std::exp(-tau);
  double var = -std::expm1(-2.0 * tau);
  Vector logit(B);
  for (int b = 0; b < B; ++b) logit[b] = -(point - decay * emb(b)).squaredNorm() / (2.0 * var);
  double mx = logit.maxCoeff();
  Vector w = (logit.array() - mx).exp();
  return SimplexPoint(w / w.sum());
}

std::vector<SingularityRow> gaussian_singularity_profile(const Embedding& emb, const TimeDilation& dilation,
                                                         const JointTable& p0, const Predictor& raw,
                                                         const Predictor& hollow, const std::vector<double>& t_grid,
                                                         int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw Error(Errc::InvalidArgument, "need at least two samples");
  const int D = p0.length(), B = p0.alphabet();
  if (emb.alphabet_size() != B) throw Error(Errc::InvalidArgument, "embedding does not match p0 alphabet");
  std::vector<SingularityRow> rows;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    double t = t_grid[j];
    if (!(t > 0.0 && t < 1.0)) throw Error(Errc::InvalidArgument, "t grid must lie in (0, 1)");
    double tau = dilation.tau(t), rate = dilation.rate(t);
    double s1[2] = {0, 0}, s2[2] = {0, 0};
    for (int i = 0; i < n_samples; ++i) {
      Rng rng = Rng::stream(seed, j * static_cast<std::uint64_t>(n_samples) + i);
      auto x0 = p0.sample(rng);
      SSPFeatures phi(D, B);
      for (int d = 0; d < D; ++d)
        phi.row(d) = phi_gaussian(emb, tau, sample_forward_gaussian(emb, tau, x0[d], rng)).weights().transpose();
      const Predictor* preds[2] = {&raw, &hollow};
      for (int k = 0; k < 2; ++k) {
        Matrix out = preds[k]->predict(phi);
        double loss = 0.0;
        for (int d = 0; d < D; ++d) {
          Vector row = out.row(d).transpose();
          loss += elbo_gaussian(emb, tau, rate, x0[d], SimplexPoint(row / row.sum()));
        }
        s1[k] += loss;
        s2[k] += loss * loss;
      }
    }
    SingularityRow row;
    row.t = t;
    double n = n_samples;
    double m0 = s1[0] / n, m1 = s1[1] / n;
    row.elbo_raw = m0;
    row.elbo_hollow = m1;
    row.stderr_raw = std::sqrt(std::max(0.0, s2[0] / n - m0 * m0) / (n - 1));
    row.stderr_hollow = std::sqrt(std::max(0.0, s2[1] / n - m1 * m1) / (n - 1));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace wfdiff
