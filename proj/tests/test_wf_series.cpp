#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "wfdiff/error.hpp"
#include "wfdiff/rng.hpp"
#include "wfdiff/wf_series.hpp"

using namespace wfdiff;

TEST_CASE("terminating hypergeometric sum") {
  for (int k : {0, 1, 5, 17})
    for (double x : {0.1, 0.5, 0.93}) {
      const double ref = oracle::hyp2f1_terminating(k, k + 2.3, 1.1, x).convert_to<double>();
      // a direct alternating sum: rounding error scales with Σ|terms|
      const double scale = oracle::hyp2f1_terminating(k, k + 2.3, 1.1, -x).convert_to<double>();
      CHECK(std::abs(hypergeom_terminating(k, k + 2.3, 1.1, x) - ref) <= 1e-14 * (k + 1) * scale);
    }
}

TEST_CASE("condition estimate") {
  const double terms[] = {1.0, -1.0, 1e-3};
  CHECK(condition_estimate(terms) == doctest::Approx(2.001 / 1e-3));
}

TEST_CASE("G matches the high-precision oracle at random parameters") {
  Rng rng(21);
  for (int i = 0; i < 40; ++i) {
    const double psi = 0.3 + 6 * rng.uniform();
    const double pi = 0.05 + 0.9 * rng.uniform();
    const double x = 0.01 + 0.98 * rng.uniform();
    const double tau = 0.05 + 1.5 * rng.uniform();
    const auto got = series_G(psi, pi, x, tau);
    const double ref = oracle::wf_g(psi, pi, x, tau);
    CAPTURE(psi);
    CAPTURE(pi);
    CAPTURE(x);
    CAPTURE(tau);
    CHECK(got.value == doctest::Approx(ref).epsilon(1e-9));
    CHECK(got.converged);
  }
}

TEST_CASE("F is the scaled derivative of G") {
  const double psi = 2.7, pi = 0.3, tau = 0.2, h = 1e-5;
  for (double x : {0.1, 0.45, 0.8}) {
    const double fd = (oracle::wf_g(psi, pi, x + h, tau) - oracle::wf_g(psi, pi, x - h, tau)) / (2 * h);
    const double f = series_F(psi, pi, x, tau).value;
    CHECK(std::exp(-psi * tau / 2) * (psi + 1) / pi * f == doctest::Approx(fd).epsilon(1e-7));
    CHECK(series_F_extended(psi, pi, x, tau).value == doctest::Approx(f).epsilon(1e-10));
  }
}

TEST_CASE("ill-conditioned sums escalate to extended precision") {
  const auto hard = series_G(4.0, 0.25, 0.25, 0.05);
  CHECK(hard.condition_number > kEscalationThreshold);
  CHECK(hard.precision_used == Precision::Extended);
  const double ref = oracle::wf_g(4.0, 0.25, 0.25, 0.05, 1000);
  CHECK(hard.value == doctest::Approx(ref).epsilon(1e-10));
  // the same sum at standard precision loses most digits
  const auto plain = series_G_truncated(4.0, 0.25, 0.25, 0.05, kDefaultKmax, Precision::Standard);
  CHECK(plain.precision_used == Precision::Standard);
  CHECK(std::abs(plain.value - ref) > 1e-6 * ref);
  const auto easy = series_G(4.0, 0.25, 0.75, 1.0);
  CHECK(easy.precision_used == Precision::Standard);
  CHECK(extended_precision_digits() >= 50u);
}

TEST_CASE("truncation is reported") {
  try {
    series_G(1.0, 0.5, 0.5, 0.002, 40);
    FAIL("expected Unconverged");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Unconverged);
    CHECK(e.is_numerical());
  }
  const auto partial = series_G_truncated(1.0, 0.5, 0.5, 0.002, 40, Precision::Standard);
  CHECK_FALSE(partial.converged);
  CHECK(partial.terms_used >= 40);
}

TEST_CASE("ancestral pmf and coefficients") {
  for (double tau : {0.05, 0.2, 1.0}) {
    double total = 0.0;
    for (int m = 0; m < 60; ++m) {
      const double ref = oracle::ancestral_pmf(3.0, tau, m);
      const auto got = ancestral_pmf(3.0, tau, m);
      // rounding error grows with the condition number at standard precision
      CHECK(std::abs(got.value - ref) <= 4e-16 * got.condition_number * std::abs(ref) + 1e-14);
      total += got.value;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
  // log c_{km} from its definition
  const double psi = 2.5, tau = 0.3;
  const int k = 7, m = 3;
  double log_rising = 0.0;
  for (int i = 0; i < k - 1; ++i) log_rising += std::log(psi + m + i);
  const double ref = std::log(2 * k + psi - 1) + log_rising - std::lgamma(m + 1.0) - std::lgamma(k - m + 1.0) -
                     k * (k + psi - 1) * tau / 2;
  CHECK(log_ancestral_coefficient(psi, tau, k, m) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("envelope partial sums bracket the pmf") {
  for (double tau : {0.06, 0.4})
    for (int m : {0, 2, 9}) {
      const auto env = ancestral_envelope(1.5, tau, m);
      const double p = oracle::ancestral_pmf(1.5, tau, m);
      REQUIRE(env.partial_sums.size() >= 2);
      for (std::size_t n = env.monotone_from; n + 1 < env.partial_sums.size(); ++n) {
        const double lo = std::min(env.partial_sums[n], env.partial_sums[n + 1]) - env.abs_error;
        const double hi = std::max(env.partial_sums[n], env.partial_sums[n + 1]) + env.abs_error;
        CHECK(lo <= p + 1e-15);
        CHECK(p <= hi + 1e-15);
      }
    }
}

TEST_CASE("batch evaluation is independent of the worker count") {
  std::vector<SeriesRequest> reqs;
  Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    SeriesRequest r;
    r.kind = static_cast<SeriesKind>(i % 3);
    r.psi = 0.5 + 4 * rng.uniform();
    r.pi_x0 = 0.1 + 0.8 * rng.uniform();
    r.x = 0.05 + 0.9 * rng.uniform();
    r.tau = i % 7 == 0 ? 0.05 : 0.05 + rng.uniform();
    r.m = i % 5;
    reqs.push_back(r);
  }
  const auto one = evaluate_series_batch(reqs, 1);
  for (unsigned w : {2u, 4u}) {
    const auto many = evaluate_series_batch(reqs, w);
    REQUIRE(many.size() == one.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(many[i].value == one[i].value);
      CHECK(many[i].precision_used == one[i].precision_used);
    }
  }
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    if (reqs[i].kind != SeriesKind::G) continue;
    CHECK(one[i].value == series_G(reqs[i].psi, reqs[i].pi_x0, reqs[i].x, reqs[i].tau).value);
  }
}
