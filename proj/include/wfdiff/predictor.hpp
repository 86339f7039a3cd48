#pragma once

#include <memory>
#include <vector>

#include "wfdiff/core.hpp"
#include "wfdiff/rng.hpp"

namespace wfdiff {

/// D × B matrix of per-position evidence vectors φ_d (rows sum to one).
using SSPFeatures = Matrix;

/// Explicit joint distribution over B^D sequences. Index of a sequence is
/// Σ_d x_d B^{D−1−d} (position 0 most significant).
class JointTable {
 public:
  JointTable(int alphabet, int length, Vector probs);

  static JointTable independent(const std::vector<Vector>& marginals);
  static JointTable uniform(int alphabet, int length);

  int alphabet() const { return alphabet_; }
  int length() const { return length_; }
  const Vector& probs() const { return probs_; }
  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }

  std::vector<int> decode(std::size_t index) const;
  std::size_t encode(const std::vector<int>& seq) const;
  std::vector<int> sample(Rng& rng) const;
  /// Marginal distribution of position d.
  Vector marginal(int d) const;
  /// −E log p(x0) in nats.
  double entropy() const;

 private:
  int alphabet_, length_;
  Vector probs_;
  Vector cumulative_;
};

/// Map from SSP features to per-position posteriors over tokens.
class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Rows of the result are distributions over B.
  virtual Matrix predict(const SSPFeatures& phi) const = 0;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

}  // namespace wfdiff
