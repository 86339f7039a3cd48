#pragma once

#include <string>
#include <variant>
#include <vector>

#include "wfdiff/core.hpp"
#include "wfdiff/predictor.hpp"
#include "wfdiff/rng.hpp"
#include "wfdiff/wf_diffusion.hpp"

namespace wfdiff {

struct DiscreteModality {
  Generator generator;
  int zeta = 1;
};

struct GaussianModality {
  Embedding embedding;
};

struct WFModality {
  WFParams params;
  double threshold = kSeriesRegimeTau;
};

using Modality = std::variant<DiscreteModality, GaussianModality, WFModality>;

std::string modality_name(const Modality& m);
int modality_alphabet(const Modality& m);

/// x_t for one position: a token (discrete, ζ = 1), normalized counts
/// (discrete, ζ > 1), a point in ℝ^r (Gaussian) or on the simplex (WF).
struct NoisedState {
  int token = -1;
  Vector value;
};

NoisedState forward_sample(const Modality& m, double tau, int x0, Rng& rng);

/// φ_b ∝ p(x_t | x0 = b).
SimplexPoint evidence(const Modality& m, double tau, const NoisedState& state);

/// The modality's per-position loss for the final prediction x̃0 and,
/// optionally, ∂L/∂x̃0. For WF the prediction is used in mixture form,
/// which is the hollow score when x̃0 is the hollow-wrapped output.
double modality_loss(const Modality& m, double tau, double tau_rate, const NoisedState& state, int x0,
                     const SimplexPoint& x_tilde, Vector* grad = nullptr);

/// φ for a whole sequence.
SSPFeatures ssp_features(const Modality& m, double tau, const std::vector<NoisedState>& states);

class UniformPredictor : public Predictor {
 public:
  Matrix predict(const SSPFeatures& phi) const override;
};

/// Exact posterior by enumeration of p0. hollow_target: p(x0^d | x_t^{−d});
/// otherwise p(x0^d | x_t). Throws TableTooLarge above 10^6 sequences.
class ExactBayesPredictor : public Predictor {
 public:
  ExactBayesPredictor(JointTable p0, bool hollow_target);
  Matrix predict(const SSPFeatures& phi) const override;
  const JointTable& table() const { return p0_; }

 private:
  JointTable p0_;
  bool hollow_target_;
  std::vector<std::vector<int>> sequences_;
};

/// Position d: normalize(φ_d ∘ base_d) with base_d evaluated on features
/// where row d is replaced by the uniform vector.
class HollowPredictor : public Predictor {
 public:
  explicit HollowPredictor(PredictorPtr base) : base_(std::move(base)) {}
  Matrix predict(const SSPFeatures& phi) const override;

 private:
  PredictorPtr base_;
};

PredictorPtr hollow_wrap(PredictorPtr base);

struct LinearGradient {
  Matrix weights;
  Vector bias;
};

/// softmax(W_d vec(φ) + b_d) per position, with vec taken row-major (φ_{0,·}, φ_{1,·}, …).
class LinearPredictor : public Predictor {
 public:
  LinearPredictor(int length, int alphabet);
  LinearPredictor(int length, int alphabet, Matrix weights, Vector bias);

  Matrix predict(const SSPFeatures& phi) const override;
  /// The hollow-wrapped output, computed without the generic wrapper.
  Matrix predict_hollow(const SSPFeatures& phi) const;
  /// Adds ∂L/∂θ for the hollow output `out` = predict_hollow(phi) given
  /// ∂L/∂out (D × B) to `grad`.
  void accumulate_hollow_gradient(const SSPFeatures& phi, const Matrix& out, const Matrix& dloss,
                                  LinearGradient& grad) const;

  LinearGradient zero_gradient() const;
  void step(const LinearGradient& grad, double lr);

  int length() const { return length_; }
  int alphabet() const { return alphabet_; }
  const Matrix& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }
  Matrix& weights() { return weights_; }
  Vector& bias() { return bias_; }

 private:
  Vector logits(const Vector& flat, int d) const;
  int length_, alphabet_;
  Matrix weights_;  // (D·B) × (D·B)
  Vector bias_;     // D·B
};

/// E_{x0 ~ posterior}[L(x0)] for one position: the per-token losses of
/// modality_loss averaged under `posterior` (one shared series evaluation
/// for WF).
double expected_modality_loss(const Modality& m, double tau, double tau_rate, const NoisedState& state,
                              const SimplexPoint& posterior, const SimplexPoint& x_tilde);

struct ElboEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

struct ElboOptions {
  /// Sample i takes t from the stratum ((i + u)/n).
  bool stratified_t = false;
  /// When set, each position's loss is replaced by its average over
  /// p(x0^d | x_t) given by this (non-hollow, exact) predictor.
  PredictorPtr posterior;
};

struct ElboSample {
  double t = 0.0;
  double tau = 0.0;
  std::vector<double> losses;  // per position
};

/// The per-sample, per-position losses behind estimate_elbo. t is drawn on
/// [t_min, 1).
std::vector<ElboSample> sample_elbo(const Modality& m, const Predictor& predictor, const JointTable& p0,
                                    const TimeDilation& dilation, int n_samples, std::uint64_t seed,
                                    const ElboOptions& options = {}, double t_min = 0.0);

/// Monte-Carlo estimate of the sequence ELBO (summed over positions) with
/// t ~ Unif(0, 1). `predictor` must already be hollow-wrapped if desired.
/// Sample i uses stream (seed, i).
ElboEstimate estimate_elbo(const Modality& m, const Predictor& predictor, const JointTable& p0,
                           const TimeDilation& dilation, int n_samples, std::uint64_t seed,
                           const ElboOptions& options = {});

struct TrainConfig {
  int steps = 2000;
  int batch = 16;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct TraceRow {
  int step = 0;
  std::string modality;
  double loss = 0.0;
};

struct TrainResult {
  LinearPredictor predictor;
  std::vector<TraceRow> trace;
};

/// Round-robin SGD on the hollow-wrapped linear predictor: step s uses
/// modalities[s mod M]. Step s draws from stream (seed, s).
TrainResult train_unified(const LinearPredictor& init, const JointTable& p0, const std::vector<Modality>& modalities,
                          const TimeDilation& dilation, const TrainConfig& config);

/// Wraps a LinearPredictor for evaluation as a hollow predictor.
class HollowLinear : public Predictor {
 public:
  explicit HollowLinear(LinearPredictor p) : p_(std::move(p)) {}
  Matrix predict(const SSPFeatures& phi) const override { return p_.predict_hollow(phi); }

 private:
  LinearPredictor p_;
};

}  // namespace wfdiff
