#include "wfdiff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace wfdiff {

namespace {

double mean_pairwise(const Matrix& x) {
  const Eigen::Index n = x.rows();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s += (x.row(i) - x.row(j)).norm();
  return 2.0 * s / (static_cast<double>(n) * (n - 1));
}

}  // namespace

double energy_distance(const Matrix& x, const Matrix& y) {
  if (x.rows() < 2 || y.rows() < 2 || x.cols() != y.cols())
    throw Error(Errc::InvalidArgument, "energy distance needs two samples of equal dimension");
  double cross = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < y.rows(); ++j) cross += (x.row(i) - y.row(j)).norm();
  cross /= static_cast<double>(x.rows()) * y.rows();
  return 2.0 * cross - mean_pairwise(x) - mean_pairwise(y);
}

double expected_gaussian_distance(double norm, double sd, int r) {
  if (!(sd > 0.0)) return norm;
  double nu = norm / sd;
  if (r == 1) {
    // folded normal
    return sd * (std::sqrt(2.0 / M_PI) * std::exp(-0.5 * nu * nu) + nu * std::erf(nu / std::sqrt(2.0)));
  }
  if (r == 2) {
    // Rice mean: sd √(π/2) L_{1/2}(−ν²/2), with scaled Bessel functions
    double x = nu * nu / 4.0;
    double i0 = boost::math::cyl_bessel_i(0, x), i1 = boost::math::cyl_bessel_i(1, x);
    if (x > 700.0) return std::sqrt(norm * norm + sd * sd);  // √(ν² + 1) sd to O(ν⁻³)
    return sd * std::sqrt(M_PI / 2.0) * std::exp(-x) * ((1.0 + 2.0 * x) * i0 + 2.0 * x * i1);
  }
  if (nu == 0.0) return sd * std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (r + 1)) - std::lgamma(0.5 * r));
  // ∫ ρ f(ρ) dρ with the noncentral chi density
  // f = e^{−(ρ−ν)²/2} ρ^r ν (νρ)^{−r/2} I_{r/2−1}(νρ) e^{−νρ}
  const double v = 0.5 * r - 1.0;
  auto scaled_bessel = [v](double x) {
    if (x < 600.0) return boost::math::cyl_bessel_i(v, x) * std::exp(-x);
    return (1.0 - (4.0 * v * v - 1.0) / (8.0 * x)) / std::sqrt(2.0 * M_PI * x);
  };
  auto integrand = [&](double rho) {
    if (rho <= 0.0) return 0.0;
    double x = rho * nu;
    return rho * std::exp(-0.5 * (rho - nu) * (rho - nu) + r * std::log(rho) + std::log(nu) - 0.5 * r * std::log(x)) *
           scaled_bessel(x);
  };
  double lo = std::max(0.0, nu - 12.0), hi = nu + 12.0 + 2.0 * std::sqrt(static_cast<double>(r));
  double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, 1e-12);
  return sd * value;
}

double energy_distance_gaussian(const Matrix& x, const Vector& mean, double sd) {
  if (x.rows() < 2 || x.cols() != mean.size()) throw Error(Errc::InvalidArgument, "energy distance: bad sample shape");
  const int r = static_cast<int>(x.cols());
  double cross = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    cross += expected_gaussian_distance((x.row(i).transpose() - mean).norm(), sd, r);
  cross /= static_cast<double>(x.rows());
  // E‖Y − Y'‖ = √2 sd E‖Z‖ = 2 sd Γ((r+1)/2)/Γ(r/2)
  double self = 2.0 * sd * std::exp(std::lgamma(0.5 * (r + 1)) - std::lgamma(0.5 * r));
  return 2.0 * cross - mean_pairwise(x) - self;
}

double normal_two_sided_p(double z) {
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(z)));
}

RankSumResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  if (n1 == 0 || n2 == 0) throw Error(Errc::InvalidArgument, "rank-sum test needs two nonempty samples");
  std::vector<std::pair<double, int>> all;
  all.reserve(n);
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end());
  double rank_a = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    double avg = 0.5 * (i + 1 + j);
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) rank_a += avg;
    i = j;
  }
  RankSumResult r;
  double dn1 = n1, dn2 = n2, dn = n;
  r.statistic = rank_a - dn1 * (dn1 + 1) / 2.0;
  double mu = dn1 * dn2 / 2.0;
  double var = dn1 * dn2 / 12.0 * ((dn + 1) - tie_term / (dn * (dn - 1)));
  if (var <= 0.0) return r;
  r.z = (r.statistic - mu) / std::sqrt(var);
  r.p_value = normal_two_sided_p(r.z);
  return r;
}

ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probabilities,
                               double min_expected) {
  if (observed.size() != probabilities.size() || observed.empty())
    throw Error(Errc::InvalidArgument, "chi-square: size mismatch");
  double total = std::accumulate(observed.begin(), observed.end(), 0.0);
  double psum = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += total * probabilities[i] / psum;
    if (e >= min_expected) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (expct.empty()) {
      obs.push_back(o);
      expct.push_back(e);
    } else {
      obs.back() += o;
      expct.back() += e;
    }
  }
  ChiSquareResult r;
  r.bins = static_cast<int>(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) r.statistic += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  r.dof = r.bins - 1;
  if (r.dof >= 1)
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.dof), r.statistic));
  return r;
}

}  // namespace wfdiff
