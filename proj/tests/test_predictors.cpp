#include <doctest.h>

#include <cmath>

#include "wfdiff/predictors.hpp"

using namespace wfdiff;

namespace {

JointTable skewed_table() {
  Vector p(9);
  p << 0.30, 0.05, 0.02, 0.04, 0.25, 0.03, 0.02, 0.04, 0.25;
  return JointTable(3, 2, p);
}

Matrix random_features(Rng& rng, int d, int b) {
  Matrix phi(d, b);
  for (int i = 0; i < phi.size(); ++i) phi.data()[i] = 0.05 + rng.uniform();
  for (int i = 0; i < d; ++i) phi.row(i) /= phi.row(i).sum();
  return phi;
}

// Posterior of each position by brute force; `skip` drops the position's own evidence.
Matrix brute_posterior(const JointTable& t, const Matrix& phi, bool skip) {
  Matrix out = Matrix::Zero(t.length(), t.alphabet());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto x = t.decode(i);
    for (int d = 0; d < t.length(); ++d) {
      double w = t.probs()[i];
      for (int e = 0; e < t.length(); ++e)
        if (!(skip && e == d)) w *= phi(e, x[e]);
      out(d, x[d]) += w;
    }
  }
  for (int d = 0; d < t.length(); ++d) out.row(d) /= out.row(d).sum();
  return out;
}

Generator pi_generator() { return parent_independent_generator(1.0, SimplexPoint::uniform(3)); }

}  // namespace

TEST_CASE("joint table indexing, marginals and entropy") {
  const auto t = skewed_table();
  CHECK(t.encode({1, 2}) == 5);
  CHECK(t.decode(7) == std::vector<int>{2, 1});
  CHECK(t.marginal(0)[0] == doctest::Approx(0.37));
  CHECK(t.marginal(1)[2] == doctest::Approx(0.30));
  double h = 0.0;
  for (int i = 0; i < 9; ++i) h -= t.probs()[i] * std::log(t.probs()[i]);
  CHECK(t.entropy() == doctest::Approx(h));
  Rng rng(2);
  int hits = 0;
  for (int i = 0; i < 20000; ++i) hits += t.encode(t.sample(rng)) == 0;
  CHECK(std::abs(hits / 20000.0 - 0.30) < 4 * std::sqrt(0.21 / 20000));
  CHECK_THROWS_AS(JointTable(2, 2, Vector::Constant(3, 1.0 / 3)), Error);
}

TEST_CASE("exact Bayes predictors agree with enumeration") {
  const auto t = skewed_table();
  Rng rng(4);
  ExactBayesPredictor full(t, false), hollow(t, true);
  const auto wrapped = hollow_wrap(std::make_shared<ExactBayesPredictor>(t, true));
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix phi = random_features(rng, 2, 3);
    CHECK((full.predict(phi) - brute_posterior(t, phi, false)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((hollow.predict(phi) - brute_posterior(t, phi, true)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((wrapped->predict(phi) - full.predict(phi)).cwiseAbs().maxCoeff() < 1e-13);
  }
  const Matrix u = UniformPredictor().predict(random_features(rng, 2, 3));
  CHECK(u(1, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("linear predictor: hollow output and gradient") {
  Rng rng(6);
  LinearPredictor lp(2, 3);
  for (int i = 0; i < lp.weights().size(); ++i) lp.weights().data()[i] = rng.normal() * 0.5;
  for (int i = 0; i < lp.bias().size(); ++i) lp.bias()[i] = rng.normal() * 0.5;
  const Matrix phi = random_features(rng, 2, 3);
  const HollowPredictor generic(std::make_shared<LinearPredictor>(lp));
  CHECK((lp.predict_hollow(phi) - generic.predict(phi)).cwiseAbs().maxCoeff() < 1e-14);

  Matrix dloss(2, 3);
  for (int i = 0; i < dloss.size(); ++i) dloss.data()[i] = rng.normal();
  auto objective = [&](const LinearPredictor& p) { return (p.predict_hollow(phi).array() * dloss.array()).sum(); };
  auto grad = lp.zero_gradient();
  lp.accumulate_hollow_gradient(phi, lp.predict_hollow(phi), dloss, grad);
  const double h = 1e-6;
  for (int k = 0; k < 12; ++k) {
    const int i = k % lp.weights().rows(), j = (5 * k) % lp.weights().cols();
    LinearPredictor up = lp, dn = lp;
    up.weights()(i, j) += h;
    dn.weights()(i, j) -= h;
    CHECK(grad.weights(i, j) == doctest::Approx((objective(up) - objective(dn)) / (2 * h)).epsilon(1e-6).scale(1e-9));
  }
  for (int i = 0; i < lp.bias().size(); ++i) {
    LinearPredictor up = lp, dn = lp;
    up.bias()[i] += h;
    dn.bias()[i] -= h;
    CHECK(grad.bias[i] == doctest::Approx((objective(up) - objective(dn)) / (2 * h)).epsilon(1e-6).scale(1e-9));
  }
  // a step against the gradient lowers the objective
  LinearPredictor moved = lp;
  moved.step(grad, 1e-3);
  CHECK(objective(moved) < objective(lp));
}

TEST_CASE("modality losses: gradients and posterior averages") {
  Vector pi(3);
  pi << 0.2, 0.3, 0.5;
  Matrix e(3, 2);
  e << 1.0, 0.0, -0.5, 0.8, -0.4, -0.9;
  const std::vector<Modality> mods{DiscreteModality{pi_generator(), 1}, GaussianModality{Embedding(e)},
                                   WFModality{WFParams(2.0, SimplexPoint(pi))}};
  Vector pred(3);
  pred << 0.25, 0.45, 0.3;
  Vector post(3);
  post << 0.6, 0.1, 0.3;
  const double tau = 0.3, rate = 1.2, h = 1e-6;
  for (const auto& m : mods) {
    CAPTURE(modality_name(m));
    CHECK(modality_alphabet(m) == 3);
    Rng rng(12);
    const auto state = forward_sample(m, tau, 1, rng);
    Vector grad;
    const double loss = modality_loss(m, tau, rate, state, 1, SimplexPoint(pred), &grad);
    CHECK(loss >= 0.0);
    // directional derivatives within the simplex
    for (int c = 0; c < 2; ++c) {
      Vector up = pred, dn = pred;
      up[c] += h, up[2] -= h;
      dn[c] -= h, dn[2] += h;
      const double fd =
          (modality_loss(m, tau, rate, state, 1, SimplexPoint(up)) - modality_loss(m, tau, rate, state, 1, SimplexPoint(dn))) /
          (2 * h);
      CHECK(grad[c] - grad[2] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
    double avg = 0.0;
    for (int b = 0; b < 3; ++b) avg += post[b] * modality_loss(m, tau, rate, state, b, SimplexPoint(pred));
    CHECK(expected_modality_loss(m, tau, rate, state, SimplexPoint(post), SimplexPoint(pred)) ==
          doctest::Approx(avg).epsilon(1e-10));
    const auto phi = evidence(m, tau, state);
    CHECK(phi.weights().sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("ELBO of the exact predictor is close to the entropy") {
  const auto t = skewed_table();
  const Modality m = DiscreteModality{pi_generator(), 1};
  const auto exact = hollow_wrap(std::make_shared<ExactBayesPredictor>(t, true));
  ElboOptions opt;
  opt.stratified_t = true;
  opt.posterior = std::make_shared<ExactBayesPredictor>(t, false);
  const auto est = estimate_elbo(m, *exact, t, TimeDilation::classical(), 4000, 3, opt);
  CHECK(std::abs(est.mean - t.entropy()) < 4 * est.std_error + 0.01);
  // the uniform predictor pays D log B
  const auto uni = estimate_elbo(m, UniformPredictor(), t, TimeDilation::classical(), 2000, 3, opt);
  CHECK(uni.mean > est.mean);
  // samples expose per-position losses
  const auto samples = sample_elbo(m, *exact, t, TimeDilation::classical(), 10, 3, opt, 0.2);
  REQUIRE(samples.size() == 10);
  CHECK(samples[0].losses.size() == 2);
  CHECK(samples[0].t >= 0.2);
}

TEST_CASE("unified training lowers the loss") {
  const auto t = skewed_table();
  const std::vector<Modality> mods{DiscreteModality{pi_generator(), 1}};
  TrainConfig cfg;
  cfg.steps = 600;
  cfg.seed = 1;
  const auto res = train_unified(LinearPredictor(2, 3), t, mods, TimeDilation::classical(), cfg);
  REQUIRE(res.trace.size() == 600);
  double first = 0, last = 0;
  for (int i = 0; i < 100; ++i) first += res.trace[i].loss, last += res.trace[500 + i].loss;
  CHECK(last < first);
  const auto before = estimate_elbo(mods[0], HollowLinear(LinearPredictor(2, 3)), t, TimeDilation::classical(), 2000, 9);
  const auto after = estimate_elbo(mods[0], HollowLinear(res.predictor), t, TimeDilation::classical(), 2000, 9);
  CHECK(after.mean < before.mean);
}
