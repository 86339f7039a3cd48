#include <doctest.h>

#include <cmath>

#include "wfdiff/gaussian.hpp"

using namespace wfdiff;

namespace {

Embedding triangle() {
  Matrix e(3, 2);
  e << 1.0, 0.0, -0.5, 0.8, -0.4, -0.9;
  return Embedding(e);
}

}  // namespace

TEST_CASE("forward Gaussian moments") {
  const auto emb = triangle();
  const double tau = 0.4;
  Rng rng(2);
  const int n = 40000;
  Vector mean = Vector::Zero(2);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector x = sample_forward_gaussian(emb, tau, 1, rng);
    mean += x / n;
    sq += (x - std::exp(-tau) * emb(1)).squaredNorm() / n;
  }
  const double var = 1.0 - std::exp(-2 * tau);
  CHECK((mean - std::exp(-tau) * emb(1)).norm() < 5 * std::sqrt(var / n));
  CHECK(sq == doctest::Approx(2 * var).epsilon(0.03));
}

TEST_CASE("Gaussian loss and weight") {
  const double tau = 0.3, rate = 1.7;
  const double s = 1 - std::exp(-2 * tau);
  CHECK(gaussian_loss_weight(tau, rate) == doctest::Approx(rate * std::exp(-2 * tau) / (s * s)));
  const auto emb = triangle();
  Vector pred(3);
  pred << 0.1, 0.6, 0.3;
  const Vector mix = 0.1 * emb(0) + 0.6 * emb(1) + 0.3 * emb(2);
  const double expected = gaussian_loss_weight(tau, rate) * (emb(2) - mix).squaredNorm();
  Vector grad;
  CHECK(elbo_gaussian(emb, tau, rate, 2, SimplexPoint(pred), &grad) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(elbo_gaussian(emb, tau, rate, 2, SimplexPoint::indicator(3, 2)) == 0.0);
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    Vector up = pred, dn = pred;
    up[c] += h;
    dn[c] -= h;
    const double fd = gaussian_loss_weight(tau, rate) *
                      ((emb(2) - emb.map_weights(up)).squaredNorm() - (emb(2) - emb.map_weights(dn)).squaredNorm()) /
                      (2 * h);
    CHECK(grad[c] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("Gaussian evidence is the normalized normal likelihood") {
  const auto emb = triangle();
  const double tau = 0.25;
  Vector point(2);
  point << 0.2, -0.3;
  const auto phi = phi_gaussian(emb, tau, point);
  const double var = 1 - std::exp(-2 * tau);
  Vector lik(3);
  for (int b = 0; b < 3; ++b) {
    const Vector d = point - std::exp(-tau) * emb(b);
    lik[b] = std::exp(-d.squaredNorm() / (2 * var)) / (2 * M_PI * var);
  }
  CHECK((phi.weights() - lik / lik.sum()).cwiseAbs().maxCoeff() < 1e-14);
  // far from every mean the softmax still normalizes
  point << 1e3, 1e3;
  CHECK(phi_gaussian(emb, 1e-3, point).weights().sum() == doctest::Approx(1.0));
}
