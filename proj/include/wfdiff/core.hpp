#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wfdiff/error.hpp"

namespace wfdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Nonnegative weights over the alphabet summing to one.
class SimplexPoint {
 public:
  explicit SimplexPoint(Vector weights);

  static SimplexPoint uniform(int size);
  static SimplexPoint indicator(int size, int token);

  const Vector& weights() const { return weights_; }
  int size() const { return static_cast<int>(weights_.size()); }
  double operator[](int b) const { return weights_[b]; }
  bool strictly_positive() const { return weights_.minCoeff() > 0.0; }

 private:
  Vector weights_;
};

/// One decay rate of a generator together with its spectral projector.
/// `projector` is the right spectral projector Π with e^{τℒ} = Σ e^{-λτ} Π;
/// the left-eigenspace projection acting on column vectors is Π^T.
struct Eigenspace {
  double decay_rate = 0.0;
  Matrix projector;
  int rank = 0;
};

/// Validated infinitesimal rate matrix with stationary distribution and
/// real spectral decomposition. Immutable after construction.
class Generator {
 public:
  /// Validates `rates` and decomposes it. Throws NotAGenerator,
  /// DegenerateStationary or ComplexSpectrum.
  static Generator build(const Matrix& rates);

  const Matrix& rates() const { return rates_; }
  const SimplexPoint& stationary() const { return stationary_; }
  /// Sorted by decay rate; entry 0 is the stationary eigenspace (λ = 0).
  const std::vector<Eigenspace>& spectrum() const { return spectrum_; }
  int alphabet_size() const { return static_cast<int>(rates_.rows()); }

  /// Smallest nonzero decay rate λ_1.
  double spectral_gap() const { return spectrum_.at(1).decay_rate; }

  /// The same chain with time measured in units of 1/c: rates scaled by c.
  Generator scaled(double c) const;

 private:
  Generator(Matrix rates, SimplexPoint stationary, std::vector<Eigenspace> spectrum)
      : rates_(std::move(rates)), stationary_(std::move(stationary)), spectrum_(std::move(spectrum)) {}

  Matrix rates_;
  SimplexPoint stationary_;
  std::vector<Eigenspace> spectrum_;
};

/// ψ(𝟙π^T − I).
Generator parent_independent_generator(double psi, const SimplexPoint& pi);

/// e^{τℒ} from the spectral decomposition. Small negative round-off is
/// clamped to zero; anything below −1e-12 throws NumericalBreakdown.
Matrix transition_matrix(const Generator& g, double tau);

/// Token embedding: row b of `vectors` is emb(b).
class Embedding {
 public:
  explicit Embedding(Matrix vectors);

  const Matrix& vectors() const { return vectors_; }
  int alphabet_size() const { return static_cast<int>(vectors_.rows()); }
  int dimension() const { return static_cast<int>(vectors_.cols()); }

  Vector operator()(int token) const { return vectors_.row(token).transpose(); }
  /// Convex combination Σ_b x_b emb(b).
  Vector operator()(const SimplexPoint& x) const { return vectors_.transpose() * x.weights(); }
  Vector map_weights(const Vector& x) const { return vectors_.transpose() * x; }

  Matrix gram() const { return vectors_ * vectors_.transpose(); }
  double min_pairwise_distance() const;

 private:
  Matrix vectors_;
};

/// Dominant-eigenspace embedding of a generator together with the
/// isometric projection Q_1 it was read from.
struct GeneratorEmbedding {
  Embedding embedding;
  Matrix q1;               // r × B, rows orthonormal
  double rescale = 1.0;    // λ_1 of the input; the embedding is for ℒ/λ_1
};

/// emb(b) = Q_1 (e_b / √π) for the generator rescaled so that λ_1 = 1.
/// The isometry onto ℝ^r is fixed by a column-pivoted QR basis of Im(Q̃_1)
/// with the first significant entry of each basis vector made positive.
GeneratorEmbedding embedding_from_generator(const Generator& g);

/// Generator on B + r + 1 states whose dominant-eigenspace embedding,
/// restricted to the first B states, reproduces `emb` up to isometry.
/// `mu` must lie in (0, 1) with all off-diagonal rates nonnegative.
Generator generator_from_embedding(const Embedding& emb, double mu);

/// Largest μ for which generator_from_embedding(emb, μ) is a valid generator.
double max_valid_mu(const Embedding& emb);

/// Increasing map t ∈ [0, 1] → τ ≥ 0 with its derivative.
class TimeDilation {
 public:
  TimeDilation(std::string name, std::function<double(double)> tau,
               std::function<double(double)> rate)
      : name_(std::move(name)), tau_(std::move(tau)), rate_(std::move(rate)) {}

  /// τ_t = −½ log(1 − t(1 − ε)).
  static TimeDilation classical(double epsilon = 1e-5);
  /// τ_t = c t.
  static TimeDilation linear(double c);

  double tau(double t) const { return tau_(t); }
  double rate(double t) const { return rate_(t); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::function<double(double)> tau_;
  std::function<double(double)> rate_;
};

/// τ^ζ_t = ½ log(ζ e^{2τ_t} − ζ + 1) and its derivative.
TimeDilation population_time_dilation(const TimeDilation& base, int zeta);

/// Scalar form of the population dilation for a given τ.
double population_tau(double tau, int zeta);

/// √(ζ − (ζ−1)e^{−2τ}) (v − π)/√π.
Vector population_rescale(const Vector& v, const SimplexPoint& pi, int zeta, double tau);

/// Inverse of population_rescale.
Vector population_unrescale(const Vector& rescaled, const SimplexPoint& pi, int zeta, double tau);

}  // namespace wfdiff
