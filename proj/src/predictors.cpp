#include "wfdiff/predictors.hpp"

#include <cmath>
#include <numeric>

#include "wfdiff/discrete.hpp"
#include "wfdiff/gaussian.hpp"

namespace wfdiff {

// ---------------------------------------------------------------- JointTable

JointTable::JointTable(int alphabet, int length, Vector probs)
    : alphabet_(alphabet), length_(length), probs_(std::move(probs)) {
  if (alphabet < 2 || length < 1) throw Error(Errc::InvalidArgument, "joint table needs B >= 2 and D >= 1");
  double n = std::pow(static_cast<double>(alphabet), length);
  if (n > 1e6) throw Error(Errc::TableTooLarge, "B^D exceeds 10^6");
  if (probs_.size() != static_cast<Eigen::Index>(n))
    throw Error(Errc::InvalidArgument, "joint table has " + std::to_string(probs_.size()) + " entries, expected B^D");
  if (!probs_.allFinite() || probs_.minCoeff() < 0.0 || std::abs(probs_.sum() - 1.0) > 1e-9)
    throw Error(Errc::InvalidArgument, "joint table is not a distribution");
  probs_ /= probs_.sum();
  cumulative_.resize(probs_.size());
  std::partial_sum(probs_.begin(), probs_.end(), cumulative_.begin());
}

JointTable JointTable::independent(const std::vector<Vector>& marginals) {
  if (marginals.empty()) throw Error(Errc::InvalidArgument, "no marginals");
  const int B = static_cast<int>(marginals[0].size());
  const int D = static_cast<int>(marginals.size());
  Vector probs = Vector::Ones(1);
  for (const auto& m : marginals) {
    if (m.size() != B) throw Error(Errc::InvalidArgument, "marginals differ in size");
    Vector next(probs.size() * B);
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      for (int b = 0; b < B; ++b) next[i * B + b] = probs[i] * m[b];
    probs = std::move(next);
  }
  return JointTable(B, D, probs);
}

JointTable JointTable::uniform(int alphabet, int length) {
  return independent(std::vector<Vector>(length, Vector::Constant(alphabet, 1.0 / alphabet)));
}

std::vector<int> JointTable::decode(std::size_t index) const {
  std::vector<int> seq(length_);
  for (int d = length_ - 1; d >= 0; --d) {
    seq[d] = static_cast<int>(index % alphabet_);
    index /= alphabet_;
  }
  return seq;
}

std::size_t JointTable::encode(const std::vector<int>& seq) const {
  std::size_t index = 0;
  for (int x : seq) index = index * alphabet_ + x;
  return index;
}

std::vector<int> JointTable::sample(Rng& rng) const {
  double u = rng.uniform() * cumulative_[cumulative_.size() - 1];
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t index = std::min<std::size_t>(it - cumulative_.begin(), size() - 1);
  while (probs_[index] == 0.0 && index > 0) --index;
  return decode(index);
}

Vector JointTable::marginal(int d) const {
  Vector m = Vector::Zero(alphabet_);
  for (std::size_t i = 0; i < size(); ++i) m[decode(i)[d]] += probs_[i];
  return m;
}

double JointTable::entropy() const {
  double h = 0.0;
  for (double p : probs_)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

// ---------------------------------------------------------------- modalities

std::string modality_name(const Modality& m) {
  switch (m.index()) {
    case 0: return "discrete";
    case 1: return "gaussian";
    default: return "wf";
  }
}

int modality_alphabet(const Modality& m) {
  if (auto* d = std::get_if<DiscreteModality>(&m)) return d->generator.alphabet_size();
  if (auto* g = std::get_if<GaussianModality>(&m)) return g->embedding.alphabet_size();
  return std::get<WFModality>(m).params.size();
}

NoisedState forward_sample(const Modality& m, double tau, int x0, Rng& rng) {
  NoisedState s;
  if (auto* d = std::get_if<DiscreteModality>(&m)) {
    auto f = sample_forward_discrete(d->generator, tau, x0, d->zeta, rng);
    s.token = f.token;
    s.value = f.counts.weights();
  } else if (auto* g = std::get_if<GaussianModality>(&m)) {
    s.value = sample_forward_gaussian(g->embedding, tau, x0, rng);
  } else {
    const auto& w = std::get<WFModality>(m);
    s.value = sample_forward_wf(w.params, tau, x0, rng, w.threshold).point.weights();
  }
  return s;
}

SimplexPoint evidence(const Modality& m, double tau, const NoisedState& state) {
  if (auto* d = std::get_if<DiscreteModality>(&m))
    return phi_discrete(d->generator, tau, SimplexPoint(state.value), d->zeta);
  if (auto* g = std::get_if<GaussianModality>(&m)) return phi_gaussian(g->embedding, tau, state.value);
  const auto& w = std::get<WFModality>(m);
  return phi_wf(w.params, tau, SimplexPoint(state.value), w.threshold);
}

namespace {

double wf_loss_with_grad(const WFModality& w, double tau, double tau_rate, const SimplexPoint& v, int x0,
                         const SimplexPoint& x_tilde, Vector* grad) {
  const WFParams& p = w.params;
  const int B = p.size();
  if (grad) grad->setZero(B);
  if (tau < w.threshold) return wf_loss(p, tau, tau_rate, v, x0, x_tilde, false, w.threshold);
  Vector d(B);
  for (int b = 0; b < B; ++b) d[b] = evaluate_g(p, tau, b, v[b], w.threshold).dlog_g;
  Vector delta = -x_tilde.weights().cwiseProduct(d);
  delta[x0] += d[x0];
  const Vector& z = v.weights();
  Vector Md = z.cwiseProduct(delta) - z * z.dot(delta);
  if (grad) *grad = -tau_rate * Md.cwiseProduct(d);
  return 0.5 * tau_rate * delta.dot(Md);
}

}  // namespace

double modality_loss(const Modality& m, double tau, double tau_rate, const NoisedState& state, int x0,
                     const SimplexPoint& x_tilde, Vector* grad) {
  if (auto* d = std::get_if<DiscreteModality>(&m))
    return elbo_discrete(d->generator, tau, tau_rate, d->zeta, SimplexPoint(state.value), x0, x_tilde, grad);
  if (auto* g = std::get_if<GaussianModality>(&m))
    return elbo_gaussian(g->embedding, tau, tau_rate, x0, x_tilde, grad);
  return wf_loss_with_grad(std::get<WFModality>(m), tau, tau_rate, SimplexPoint(state.value), x0, x_tilde, grad);
}

double expected_modality_loss(const Modality& m, double tau, double tau_rate, const NoisedState& state,
                              const SimplexPoint& posterior, const SimplexPoint& x_tilde) {
  const int B = posterior.size();
  auto* w = std::get_if<WFModality>(&m);
  if (!w || tau < w->threshold) {
    double total = 0.0;
    for (int b = 0; b < B; ++b)
      if (posterior[b] > 0.0) total += posterior[b] * modality_loss(m, tau, tau_rate, state, b, x_tilde);
    return total;
  }
  const SimplexPoint v(state.value);
  Vector d(B);
  for (int b = 0; b < B; ++b) d[b] = evaluate_g(w->params, tau, b, v[b], w->threshold).dlog_g;
  const Vector& z = v.weights();
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    if (posterior[b] == 0.0) continue;
    Vector delta = -x_tilde.weights().cwiseProduct(d);
    delta[b] += d[b];
    total += posterior[b] * 0.5 * tau_rate * (delta.dot(z.cwiseProduct(delta)) - std::pow(z.dot(delta), 2));
  }
  return total;
}

SSPFeatures ssp_features(const Modality& m, double tau, const std::vector<NoisedState>& states) {
  const int B = modality_alphabet(m);
  SSPFeatures phi(static_cast<int>(states.size()), B);
  for (std::size_t d = 0; d < states.size(); ++d) phi.row(d) = evidence(m, tau, states[d]).weights().transpose();
  return phi;
}

// ---------------------------------------------------------------- predictors

Matrix UniformPredictor::predict(const SSPFeatures& phi) const {
  return Matrix::Constant(phi.rows(), phi.cols(), 1.0 / phi.cols());
}

ExactBayesPredictor::ExactBayesPredictor(JointTable p0, bool hollow_target)
    : p0_(std::move(p0)), hollow_target_(hollow_target) {
  sequences_.reserve(p0_.size());
  for (std::size_t i = 0; i < p0_.size(); ++i) sequences_.push_back(p0_.decode(i));
}

Matrix ExactBayesPredictor::predict(const SSPFeatures& phi) const {
  const int D = p0_.length(), B = p0_.alphabet();
  if (phi.rows() != D || phi.cols() != B) throw Error(Errc::InvalidArgument, "features do not match p0 shape");
  Matrix out = Matrix::Zero(D, B);
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    double p = p0_.probs()[i];
    if (p == 0.0) continue;
    const auto& x = sequences_[i];
    double all = p;
    for (int d = 0; d < D; ++d) all *= phi(d, x[d]);
    for (int d = 0; d < D; ++d) {
      double w;
      if (!hollow_target_) {
        w = all;
      } else {
        w = p;
        for (int e = 0; e < D; ++e)
          if (e != d) w *= phi(e, x[e]);
      }
      out(d, x[d]) += w;
    }
  }
  for (int d = 0; d < D; ++d) {
    double s = out.row(d).sum();
    if (!(s > 0.0)) throw Error(Errc::ZeroProbability, "evidence has zero probability under p0");
    out.row(d) /= s;
  }
  return out;
}

Matrix HollowPredictor::predict(const SSPFeatures& phi) const {
  const Eigen::Index D = phi.rows(), B = phi.cols();
  Matrix out(D, B);
  SSPFeatures masked = phi;
  for (Eigen::Index d = 0; d < D; ++d) {
    masked.row(d).setConstant(1.0 / B);
    Vector q = base_->predict(masked).row(d).transpose();
    masked.row(d) = phi.row(d);
    Vector w = phi.row(d).transpose().cwiseProduct(q);
    double s = w.sum();
    if (!(s > 0.0)) throw Error(Errc::ZeroProbability, "hollow product vanishes");
    out.row(d) = (w / s).transpose();
  }
  return out;
}

PredictorPtr hollow_wrap(PredictorPtr base) { return std::make_shared<HollowPredictor>(std::move(base)); }

LinearPredictor::LinearPredictor(int length, int alphabet)
    : LinearPredictor(length, alphabet, Matrix::Zero(length * alphabet, length * alphabet),
                      Vector::Zero(length * alphabet)) {}

LinearPredictor::LinearPredictor(int length, int alphabet, Matrix weights, Vector bias)
    : length_(length), alphabet_(alphabet), weights_(std::move(weights)), bias_(std::move(bias)) {
  const int n = length * alphabet;
  if (weights_.rows() != n || weights_.cols() != n || bias_.size() != n)
    throw Error(Errc::InvalidArgument, "linear predictor parameters have the wrong shape");
}

namespace {

Vector flatten(const SSPFeatures& phi) {
  Vector flat(phi.size());
  for (Eigen::Index d = 0; d < phi.rows(); ++d)
    for (Eigen::Index b = 0; b < phi.cols(); ++b) flat[d * phi.cols() + b] = phi(d, b);
  return flat;
}

Vector softmax(const Vector& z) {
  Vector e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

Vector LinearPredictor::logits(const Vector& flat, int d) const {
  return weights_.middleRows(d * alphabet_, alphabet_) * flat + bias_.segment(d * alphabet_, alphabet_);
}

Matrix LinearPredictor::predict(const SSPFeatures& phi) const {
  Vector flat = flatten(phi);
  Matrix out(length_, alphabet_);
  for (int d = 0; d < length_; ++d) out.row(d) = softmax(logits(flat, d)).transpose();
  return out;
}

Matrix LinearPredictor::predict_hollow(const SSPFeatures& phi) const {
  Vector flat = flatten(phi);
  Matrix out(length_, alphabet_);
  for (int d = 0; d < length_; ++d) {
    Vector masked = flat;
    masked.segment(d * alphabet_, alphabet_).setConstant(1.0 / alphabet_);
    Vector w = softmax(logits(masked, d)).cwiseProduct(phi.row(d).transpose());
    out.row(d) = (w / w.sum()).transpose();
  }
  return out;
}

void LinearPredictor::accumulate_hollow_gradient(const SSPFeatures& phi, const Matrix& out, const Matrix& dloss,
                                                 LinearGradient& grad) const {
  Vector flat = flatten(phi);
  for (int d = 0; d < length_; ++d) {
    Vector x = out.row(d).transpose();
    Vector g = dloss.row(d).transpose();
    Vector dz = x.cwiseProduct(g - Vector::Constant(alphabet_, x.dot(g)));
    Vector masked = flat;
    masked.segment(d * alphabet_, alphabet_).setConstant(1.0 / alphabet_);
    grad.weights.middleRows(d * alphabet_, alphabet_) += dz * masked.transpose();
    grad.bias.segment(d * alphabet_, alphabet_) += dz;
  }
}

LinearGradient LinearPredictor::zero_gradient() const {
  return {Matrix::Zero(weights_.rows(), weights_.cols()), Vector::Zero(bias_.size())};
}

void LinearPredictor::step(const LinearGradient& grad, double lr) {
  weights_ -= lr * grad.weights;
  bias_ -= lr * grad.bias;
}

// ---------------------------------------------------------------- ELBO estimation and training

namespace {

std::vector<double> position_losses(const Modality& m, const Predictor& predictor, const JointTable& p0,
                                    double tau, double rate, const Predictor* posterior, Rng& rng) {
  auto x0 = p0.sample(rng);
  std::vector<NoisedState> states;
  states.reserve(x0.size());
  for (int x : x0) states.push_back(forward_sample(m, tau, x, rng));
  SSPFeatures phi = ssp_features(m, tau, states);
  Matrix out = predictor.predict(phi);
  Matrix post = posterior ? posterior->predict(phi) : Matrix();
  std::vector<double> losses(x0.size());
  for (std::size_t d = 0; d < x0.size(); ++d) {
    Vector row = out.row(d).transpose();
    SimplexPoint x_tilde(row / row.sum());
    if (posterior) {
      Vector pr = post.row(d).transpose();
      losses[d] = expected_modality_loss(m, tau, rate, states[d], SimplexPoint(pr / pr.sum()), x_tilde);
    } else {
      losses[d] = modality_loss(m, tau, rate, states[d], x0[d], x_tilde);
    }
  }
  return losses;
}

}  // namespace

std::vector<ElboSample> sample_elbo(const Modality& m, const Predictor& predictor, const JointTable& p0,
                                    const TimeDilation& dilation, int n_samples, std::uint64_t seed,
                                    const ElboOptions& options, double t_min) {
  if (n_samples < 1) throw Error(Errc::InvalidArgument, "need at least one sample");
  if (!(t_min >= 0.0 && t_min < 1.0)) throw Error(Errc::InvalidArgument, "t_min must lie in [0, 1)");
  std::vector<ElboSample> out(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    Rng rng = Rng::stream(seed, i);
    double u = rng.uniform_open();
    if (options.stratified_t) u = (i + u) / n_samples;
    double t = std::clamp(t_min + (1.0 - t_min) * u, 1e-12, 1.0 - 1e-12);
    out[i].t = t;
    out[i].tau = dilation.tau(t);
    out[i].losses = position_losses(m, predictor, p0, out[i].tau, dilation.rate(t), options.posterior.get(), rng);
  }
  return out;
}

ElboEstimate estimate_elbo(const Modality& m, const Predictor& predictor, const JointTable& p0,
                           const TimeDilation& dilation, int n_samples, std::uint64_t seed,
                           const ElboOptions& options) {
  auto samples = sample_elbo(m, predictor, p0, dilation, n_samples, seed, options);
  std::vector<double> losses;
  losses.reserve(samples.size());
  for (const auto& s : samples) losses.push_back(std::accumulate(s.losses.begin(), s.losses.end(), 0.0));
  ElboEstimate e;
  e.samples = n_samples;
  const double n = n_samples;
  e.mean = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  double ss = 0.0;
  if (options.stratified_t) {
    // adjacent strata as pairs
    int pairs = 0;
    for (int i = 0; i + 1 < n_samples; i += 2, ++pairs) ss += (losses[i] - losses[i + 1]) * (losses[i] - losses[i + 1]);
    e.std_error = pairs > 0 ? std::sqrt(ss / (2.0 * pairs) / n) : 0.0;
  } else {
    for (double l : losses) ss += (l - e.mean) * (l - e.mean);
    e.std_error = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  }
  return e;
}

TrainResult train_unified(const LinearPredictor& init, const JointTable& p0, const std::vector<Modality>& modalities,
                          const TimeDilation& dilation, const TrainConfig& config) {
  if (modalities.empty()) throw Error(Errc::InvalidArgument, "need at least one modality");
  if (config.batch < 1 || config.steps < 0) throw Error(Errc::InvalidArgument, "bad training configuration");
  for (const auto& m : modalities)
    if (modality_alphabet(m) != p0.alphabet()) throw Error(Errc::InvalidArgument, "modality alphabet differs from p0");
  TrainResult result{init, {}};
  LinearPredictor& model = result.predictor;
  const int D = p0.length(), B = p0.alphabet();
  for (int s = 0; s < config.steps; ++s) {
    const Modality& m = modalities[s % modalities.size()];
    Rng rng = Rng::stream(config.seed, s);
    LinearGradient grad = model.zero_gradient();
    double loss_sum = 0.0;
    int used = 0;
    for (int i = 0; i < config.batch; ++i) {
      double t = std::clamp(rng.uniform_open(), 1e-12, 1.0 - 1e-12);
      double tau = dilation.tau(t), rate = dilation.rate(t);
      auto x0 = p0.sample(rng);
      std::vector<NoisedState> states;
      for (int x : x0) states.push_back(forward_sample(m, tau, x, rng));
      SSPFeatures phi = ssp_features(m, tau, states);
      Matrix out = model.predict_hollow(phi);
      Matrix dloss = Matrix::Zero(D, B);
      double loss = 0.0;
      for (int d = 0; d < D; ++d) {
        Vector g;
        Vector row = out.row(d).transpose();
        loss += modality_loss(m, tau, rate, states[d], x0[d], SimplexPoint(row / row.sum()), &g);
        dloss.row(d) = g.transpose();
      }
      if (!std::isfinite(loss) || !dloss.allFinite()) continue;
      model.accumulate_hollow_gradient(phi, out, dloss, grad);
      loss_sum += loss;
      ++used;
    }
    if (used > 0) {
      grad.weights /= used;
      grad.bias /= used;
      model.step(grad, config.learning_rate);
    }
    result.trace.push_back({s, modality_name(m), used > 0 ? loss_sum / used : 0.0});
  }
  return result;
}

}  // namespace wfdiff
