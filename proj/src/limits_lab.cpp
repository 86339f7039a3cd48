#include "wfdiff/limits_lab.hpp"

#include <cmath>
#include <map>

#include <unsupported/Eigen/MatrixFunctions>

#include "wfdiff/discrete.hpp"
#include "wfdiff/gaussian.hpp"
#include "wfdiff/stats.hpp"

namespace wfdiff {

namespace {

void enumerate(int alphabet, int left, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == alphabet - 1) {
    prefix.push_back(left);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int n = left; n >= 0; --n) {
    prefix.push_back(n);
    enumerate(alphabet, left - n, prefix, out);
    prefix.pop_back();
  }
}

double log_multinomial(const std::vector<int>& n, const Vector& p) {
  int total = 0;
  double lp = 0.0;
  for (std::size_t b = 0; b < n.size(); ++b) {
    total += n[b];
    if (n[b] == 0) continue;
    if (p[b] <= 0.0) return -std::numeric_limits<double>::infinity();
    lp += n[b] * std::log(p[b]) - std::lgamma(n[b] + 1.0);
  }
  return lp + std::lgamma(total + 1.0);
}

}  // namespace

CountSpace::CountSpace(int alphabet, int zeta) : alphabet_(alphabet), zeta_(zeta) {
  if (alphabet < 1 || zeta < 1) throw Error(Errc::InvalidArgument, "count space needs B >= 1 and zeta >= 1");
  std::vector<int> prefix;
  enumerate(alphabet, zeta, prefix, states_);
}

int CountSpace::index(const std::vector<int>& counts) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), counts, std::greater<>());
  if (it == states_.end() || *it != counts) throw Error(Errc::InvalidArgument, "not a count state of this space");
  return static_cast<int>(it - states_.begin());
}

int CountSpace::pure(int token) const {
  std::vector<int> n(alphabet_, 0);
  n.at(token) = zeta_;
  return index(n);
}

Matrix wf_ctmc_generator(const Generator& g, int zeta, bool reproduction) {
  const int B = g.alphabet_size();
  if (zeta > 8 || B > 3) throw Error(Errc::StateSpaceTooLarge, "exact chain limited to zeta <= 8 and B <= 3");
  CountSpace space(B, zeta);
  const int S = space.size();
  Matrix q = Matrix::Zero(S, S);
  const Matrix& L = g.rates();
  for (int i = 0; i < S; ++i) {
    const auto& n = space.state(i);
    for (int b = 0; b < B; ++b) {
      if (n[b] == 0) continue;
      for (int c = 0; c < B; ++c) {
        if (c == b || L(b, c) == 0.0) continue;
        auto m = n;
        --m[b];
        ++m[c];
        q(i, space.index(m)) += n[b] * L(b, c);
      }
    }
    if (reproduction) {
      Vector freq(B);
      for (int b = 0; b < B; ++b) freq[b] = static_cast<double>(n[b]) / zeta;
      for (int j = 0; j < S; ++j)
        if (j != i) q(i, j) += zeta * std::exp(log_multinomial(space.state(j), freq));
    }
    q(i, i) = 0.0;
    q(i, i) = -q.row(i).sum();
  }
  return q;
}

Vector ctmc_marginal(const Matrix& q, int start, double tau) {
  if (tau < 0.0) throw Error(Errc::InvalidArgument, "tau must be >= 0");
  Matrix e = (q * tau).exp();
  Vector row = e.row(start).transpose().cwiseMax(0.0);
  return row / row.sum();
}

int simulate_ctmc(const Matrix& q, int start, double tau, Rng& rng) {
  int state = start;
  double t = 0.0;
  for (;;) {
    double rate = -q(state, state);
    if (!(rate > 0.0)) return state;
    t += -std::log(rng.uniform_open()) / rate;
    if (t > tau) return state;
    double u = rng.uniform() * rate, acc = 0.0;
    int next = state;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (j == state || q(state, j) <= 0.0) continue;
      next = static_cast<int>(j);
      if ((acc += q(state, j)) > u) break;
    }
    state = next;
  }
}

Vector product_form_marginal(const Generator& g, const CountSpace& space, int start, double tau) {
  const int B = space.alphabet();
  Matrix P = transition_matrix(g, tau);
  std::map<std::vector<int>, double> dist{{std::vector<int>(B, 0), 1.0}};
  const auto& n0 = space.state(start);
  for (int b = 0; b < B; ++b) {
    for (int k = 0; k < n0[b]; ++k) {
      std::map<std::vector<int>, double> next;
      for (const auto& [counts, prob] : dist) {
        for (int c = 0; c < B; ++c) {
          auto m = counts;
          ++m[c];
          next[m] += prob * P(b, c);
        }
      }
      dist = std::move(next);
    }
  }
  Vector out = Vector::Zero(space.size());
  for (const auto& [counts, prob] : dist) out[space.index(counts)] += prob;
  return out;
}

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = x.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxx > 0 ? sxy / sxx : 0.0;
}

Generator unit_gap(const Generator& g) { return g.scaled(1.0 / g.spectral_gap()); }

}  // namespace

ConvergenceReport gaussian_limit_experiment(const Generator& g, const TimeDilation& dilation, int x0,
                                            const std::vector<double>& t_grid, const std::vector<int>& zeta_grid,
                                            const GaussianLimitOptions& options) {
  for (std::size_t i = 1; i < zeta_grid.size(); ++i)
    if (zeta_grid[i] <= zeta_grid[i - 1]) throw Error(Errc::InvalidArgument, "zeta grid must be increasing");
  const Generator g1 = unit_gap(g);
  const auto ge = embedding_from_generator(g1);
  const SimplexPoint& pi = g1.stationary();
  const int r = ge.embedding.dimension();
  ConvergenceReport report;
  double slope_sum = 0.0;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double tau = dilation.tau(t_grid[j]);
    const Vector mean = std::exp(-tau) * ge.embedding(x0);
    const double sd = std::sqrt(-std::expm1(-2.0 * tau));
    std::vector<double> lz, lm;
    // The same uniforms drive every ζ at this t, so the cells are coupled.
    Rng rng = Rng::stream(options.seed, j);
    const int B = g1.alphabet_size();
    std::vector<double> uniforms(static_cast<std::size_t>(options.n_samples) * (B - 1));
    for (auto& u : uniforms) u = rng.uniform_open();
    for (std::size_t i = 0; i < zeta_grid.size(); ++i) {
      const int zeta = zeta_grid[i];
      Vector p = transition_matrix(g1, population_tau(tau, zeta)).row(x0).transpose();
      Matrix samples(options.n_samples, r);
      for (int s = 0; s < options.n_samples; ++s) {
        auto n = multinomial_by_inversion(zeta, p, &uniforms[static_cast<std::size_t>(s) * (B - 1)]);
        Vector v(p.size());
        for (Eigen::Index b = 0; b < p.size(); ++b) v[b] = static_cast<double>(n[b]) / zeta;
        samples.row(s) = (ge.q1 * population_rescale(v, pi, zeta, tau)).transpose();
      }
      double metric = energy_distance_gaussian(samples, mean, sd);
      // null spread of the estimator: sd of ‖X − Y‖ over √n
      double mc = 2.0 * sd * std::sqrt(static_cast<double>(r)) / options.n_samples;
      report.cells.push_back({zeta, t_grid[j], metric, mc});
      if (metric > 0) {
        lz.push_back(std::log(zeta));
        lm.push_back(std::log(metric));
      }
    }
    slope_sum += fit_slope(lz, lm);
  }
  report.decay_slope = t_grid.empty() ? 0.0 : slope_sum / t_grid.size();
  return report;
}

Matrix nondominant_correlation(const Generator& g, const TimeDilation& dilation, double t,
                               const std::vector<int>& zeta_grid, int n_samples, std::uint64_t seed) {
  const Generator g1 = unit_gap(g);
  const int B = g1.alphabet_size();
  const auto& spec = g1.spectrum();
  const int spaces = static_cast<int>(spec.size()) - 2;
  Matrix out = Matrix::Zero(zeta_grid.size(), std::max(spaces, 0));
  if (spaces <= 0) return out;
  const double tau = dilation.tau(t);
  const SimplexPoint& pi = g1.stationary();
  for (std::size_t i = 0; i < zeta_grid.size(); ++i) {
    const int zeta = zeta_grid[i];
    Rng rng = Rng::stream(seed, i);
    Matrix P = transition_matrix(g1, population_tau(tau, zeta));
    // between-token share of the variance of each projected component
    for (int k = 0; k < spaces; ++k) {
      const Matrix proj = spec[k + 2].projector.transpose();
      std::vector<Vector> group_mean(B, Vector::Zero(B));
      std::vector<int> group_n(B, 0);
      Vector grand = Vector::Zero(B);
      double total_ss = 0.0;
      std::vector<Vector> draws;
      std::vector<int> labels;
      for (int s = 0; s < n_samples; ++s) {
        int x0 = rng.uniform_int(0, B - 1);
        auto n = sample_multinomial(zeta, P.row(x0).transpose(), rng);
        Vector v(B);
        for (int b = 0; b < B; ++b) v[b] = static_cast<double>(n[b]) / zeta;
        Vector y = proj * population_rescale(v, pi, zeta, tau);
        draws.push_back(y);
        labels.push_back(x0);
        group_mean[x0] += y;
        ++group_n[x0];
        grand += y;
      }
      grand /= n_samples;
      for (const auto& y : draws) total_ss += (y - grand).squaredNorm();
      double between = 0.0;
      for (int b = 0; b < B; ++b)
        if (group_n[b] > 0) between += group_n[b] * (group_mean[b] / group_n[b] - grand).squaredNorm();
      out(i, k) = total_ss > 0 ? std::sqrt(between / total_ss) : 0.0;
    }
  }
  return out;
}

std::vector<ElboLimitPoint> gaussian_elbo_limit(const Generator& g, const TimeDilation& dilation, double t, int x0,
                                                const SimplexPoint& x_tilde, const std::vector<int>& zeta_grid) {
  const Generator g1 = unit_gap(g);
  const auto ge = embedding_from_generator(g1);
  const double tau = dilation.tau(t), rate = dilation.rate(t);
  const double l_gauss = elbo_gaussian(ge.embedding, tau, rate, x0, x_tilde);
  std::vector<ElboLimitPoint> out;
  for (int zeta : zeta_grid) {
    auto pd = population_time_dilation(dilation, zeta);
    double tz = pd.tau(t), rz = pd.rate(t);
    Vector expected = transition_matrix(g1, tz).row(x0).transpose();
    double l = elbo_discrete(g1, tz, rz, zeta, SimplexPoint(expected / expected.sum()), x0, x_tilde);
    out.push_back({zeta, l, l_gauss, std::abs(l - l_gauss) / l_gauss});
  }
  return out;
}

double wf_ctmc_loss(const Matrix& q, const CountSpace& space, double tau, double tau_rate, int state, int x0,
                    const SimplexPoint& x_tilde) {
  const int B = space.alphabet(), S = space.size();
  std::vector<Vector> marg(B);
  for (int c = 0; c < B; ++c)
    if (c == x0 || x_tilde[c] > 0.0) marg[c] = ctmc_marginal(q, space.pure(c), tau);
  double total = 0.0;
  for (int y = 0; y < S; ++y) {
    if (y == state || q(y, state) <= 0.0) continue;
    double w_true = marg[x0][y] / marg[x0][state];
    double w_pred = 0.0;
    for (int c = 0; c < B; ++c)
      if (x_tilde[c] > 0.0) w_pred += x_tilde[c] * marg[c][y] / marg[c][state];
    total += q(y, state) * tau_rate * poisson_kl(w_true, w_pred);
  }
  return total;
}

namespace {

std::vector<int> nearest_lattice(const SimplexPoint& v, int zeta) {
  const int B = v.size();
  std::vector<int> n(B);
  std::vector<std::pair<double, int>> rem;
  int used = 0;
  for (int b = 0; b < B; ++b) {
    double x = v[b] * zeta;
    n[b] = static_cast<int>(std::floor(x));
    used += n[b];
    rem.push_back({x - n[b], b});
  }
  std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (int k = 0; used < zeta; ++k, ++used) ++n[rem[k % B].second];
  return n;
}

}  // namespace

std::vector<WFLimitPoint> wf_limit_experiment(const WFParams& p, double tau, double tau_rate, const SimplexPoint& v,
                                              int x0, const SimplexPoint& x_tilde, const std::vector<int>& zeta_grid) {
  const int B = p.size();
  Generator half = parent_independent_generator(0.5 * p.psi, p.pi);
  std::vector<WFLimitPoint> out;
  for (int zeta : zeta_grid) {
    CountSpace space(B, zeta);
    Matrix q = wf_ctmc_generator(half, zeta);
    auto n = nearest_lattice(v, zeta);
    Vector lv(B);
    for (int b = 0; b < B; ++b) lv[b] = static_cast<double>(n[b]) / zeta;
    SimplexPoint lattice(lv);
    double disc = wf_ctmc_loss(q, space, tau, tau_rate, space.index(n), x0, x_tilde);
    double cont = elbo_wf(tau_rate, lattice, score_given_x0(p, tau, x0, lattice),
                          score_given_prediction(p, tau, x_tilde, lattice, false));
    out.push_back({zeta, lattice, disc, cont, std::abs(disc - cont)});
  }
  return out;
}

CounterexampleResult argmax_counterexample(double dt, int n_paths, std::uint64_t seed, double tau_max,
                                           double marginal_tau) {
  if (!(dt > 0.0) || n_paths < 1) throw Error(Errc::InvalidArgument, "need dt > 0 and n_paths >= 1");
  const int steps = static_cast<int>(std::llround(tau_max / dt));
  const int check = static_cast<int>(std::llround(marginal_tau / dt));
  // Cumulative hazard H(τ) with ½(1 + e^{−2H}) = Φ(a), a = e^{−τ}/√(1 − e^{−2τ}).
  std::vector<double> hazard(steps + 1, 0.0);
  for (int k = 1; k <= steps; ++k) {
    double tau = k * dt;
    double a = std::exp(-tau) / std::sqrt(-std::expm1(-2.0 * tau));
    hazard[k] = -0.5 * std::log1p(-std::erfc(a / std::sqrt(2.0)));
  }
  const double decay = std::exp(-dt), noise = std::sqrt(-std::expm1(-2.0 * dt));
  CounterexampleResult res;
  res.marginal_check_tau = check * dt;
  res.gaussian_transitions.resize(n_paths);
  res.discrete_transitions.resize(n_paths);
  int same_g = 0, same_d = 0;
  for (int i = 0; i < n_paths; ++i) {
    Rng rng = Rng::stream(seed, i);
    double x = 1.0;
    int sign_state = 1, chain = 1, flips_g = 0, flips_d = 0;
    for (int k = 1; k <= steps; ++k) {
      x = decay * x + noise * rng.normal();
      int s = x >= 0.0 ? 1 : -1;
      if (s != sign_state) ++flips_g, sign_state = s;
      double flip = -0.5 * std::expm1(-2.0 * (hazard[k] - hazard[k - 1]));
      if (rng.uniform() < flip) ++flips_d, chain = -chain;
      if (k == check) {
        same_g += sign_state == 1;
        same_d += chain == 1;
      }
    }
    res.gaussian_transitions[i] = flips_g;
    res.discrete_transitions[i] = flips_d;
  }
  res.gaussian_same_fraction = static_cast<double>(same_g) / n_paths;
  res.discrete_same_fraction = static_cast<double>(same_d) / n_paths;
  return res;
}

}  // namespace wfdiff
