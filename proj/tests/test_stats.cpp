#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "wfdiff/rng.hpp"
#include "wfdiff/stats.hpp"

using namespace wfdiff;

TEST_CASE("energy distance is the unbiased U-statistic") {
  Rng rng(4);
  Matrix x(7, 2), y(5, 2);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (int i = 0; i < y.size(); ++i) y.data()[i] = 0.5 + rng.normal();
  double xy = 0, xx = 0, yy = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) xy += (x.row(i) - y.row(j)).norm() / 35;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j)
      if (i != j) xx += (x.row(i) - x.row(j)).norm() / 42;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) yy += (y.row(i) - y.row(j)).norm() / 20;
  CHECK(energy_distance(x, y) == doctest::Approx(2 * xy - xx - yy).epsilon(1e-12));
}

TEST_CASE("expected distance to a Gaussian") {
  const double sd = 1.3;
  for (double a : {0.0, 0.4, 2.0, 7.5}) {
    const double rho = a / sd;
    const double r1 = sd * std::sqrt(2 / M_PI) * std::exp(-rho * rho / 2) + a * std::erf(rho / std::sqrt(2.0));
    CHECK(expected_gaussian_distance(a, sd, 1) == doctest::Approx(r1).epsilon(1e-10));
    if (a > 0.0) {
      const double r3 = sd * (std::sqrt(2 / M_PI) * std::exp(-rho * rho / 2) + (rho + 1 / rho) * std::erf(rho / std::sqrt(2.0)));
      CHECK(expected_gaussian_distance(a, sd, 3) == doctest::Approx(r3).epsilon(1e-8));
    } else {
      CHECK(expected_gaussian_distance(a, sd, 3) == doctest::Approx(sd * 2 * std::sqrt(2 / M_PI)).epsilon(1e-8));
    }
    // r = 2 by a two-dimensional quadrature in polar coordinates
    using boost::math::quadrature::gauss_kronrod;
    const double r2 = gauss_kronrod<double, 61>::integrate(
        [&](double theta) {
          return gauss_kronrod<double, 61>::integrate(
              [&](double r) {
                const double dx = a - r * std::cos(theta), dy = r * std::sin(theta);
                return std::hypot(dx, dy) * r * std::exp(-r * r / (2 * sd * sd)) / (2 * M_PI * sd * sd);
              },
              0.0, 12 * sd, 8, 1e-13);
        },
        0.0, 2 * M_PI, 8, 1e-12);
    CHECK(expected_gaussian_distance(a, sd, 2) == doctest::Approx(r2).epsilon(1e-7));
    // r = 5 against the Gaussian chi mean at a = 0 and Monte Carlo otherwise
    if (a == 0.0) {
      CHECK(expected_gaussian_distance(0.0, sd, 5) ==
            doctest::Approx(sd * std::sqrt(2.0) * std::tgamma(3.0) / std::tgamma(2.5)).epsilon(1e-8));
    }
  }
}

TEST_CASE("energy distance to a Gaussian is near zero for Gaussian samples") {
  Rng rng(11);
  Matrix x(2000, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = 0.7 * rng.normal();
  CHECK(std::abs(energy_distance_gaussian(x, Vector::Zero(3), 0.7)) < 5e-3);
  CHECK(energy_distance_gaussian(x, Vector::Constant(3, 1.0), 0.7) > 0.5);
}

TEST_CASE("Mann-Whitney statistic") {
  const std::vector<double> a{1.1, 2.2, 3.3, 4.4}, b{0.5, 2.7, 5.0};
  // pairs with a > b: 1.1>0.5, 2.2>0.5, 3.3>0.5, 3.3>2.7, 4.4>0.5, 4.4>2.7
  const auto r = mann_whitney(a, b);
  CHECK(r.statistic == doctest::Approx(6.0));
  const double mu = 6.0, sigma = std::sqrt(4 * 3 * 8 / 12.0);
  CHECK(r.z == doctest::Approx((6.0 - mu) / sigma));
  CHECK(r.p_value == doctest::Approx(1.0));
  const std::vector<double> lo{1, 2, 3, 4, 5, 6, 7, 8}, hi{11, 12, 13, 14, 15, 16, 17, 18};
  CHECK(mann_whitney(lo, hi).p_value < 0.001);
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("chi-square goodness of fit") {
  const std::vector<double> obs{18, 22, 30, 30};
  const std::vector<double> p{0.2, 0.2, 0.3, 0.3};
  const auto r = chi_square_gof(obs, p);
  const double stat = 4.0 / 20 + 4.0 / 20 + 0.0 + 0.0;
  CHECK(r.statistic == doctest::Approx(stat));
  CHECK(r.dof == 3);
  CHECK(r.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), stat))));
  // tiny expected cells are pooled
  const auto pooled = chi_square_gof({50, 45, 3, 2}, {0.5, 0.45, 0.03, 0.02});
  CHECK(pooled.bins == 3);
  CHECK(pooled.dof == 2);
}
