#include "wfdiff/core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace wfdiff {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kImagTol = 1e-9;
constexpr double kGroupTol = 1e-6;
constexpr double kProjectorTol = 1e-8;

double scale_of(const Matrix& m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

}  // namespace

SimplexPoint::SimplexPoint(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() < 1) throw Error(Errc::InvalidArgument, "empty simplex point");
  if (!weights_.allFinite() || weights_.minCoeff() < 0.0)
    throw Error(Errc::InvalidArgument, "simplex point has a negative or non-finite weight");
  if (std::abs(weights_.sum() - 1.0) > 1e-10)
    throw Error(Errc::InvalidArgument, "simplex point weights do not sum to 1");
}

SimplexPoint SimplexPoint::uniform(int size) {
  return SimplexPoint(Vector::Constant(size, 1.0 / size));
}

SimplexPoint SimplexPoint::indicator(int size, int token) {
  Vector w = Vector::Zero(size);
  w[token] = 1.0;
  return SimplexPoint(std::move(w));
}

Generator Generator::build(const Matrix& rates) {
  const auto n = rates.rows();
  if (n != rates.cols() || n < 2)
    throw Error(Errc::NotAGenerator, "rate matrix must be square with at least 2 states");
  if (!rates.allFinite()) throw Error(Errc::NotAGenerator, "rate matrix has non-finite entries");
  const double scale = scale_of(rates);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && rates(i, j) < 0.0)
        throw Error(Errc::NotAGenerator, "negative off-diagonal rate");
    }
    if (std::abs(rates.row(i).sum()) > kRowSumTol * scale)
      throw Error(Errc::NotAGenerator, "row " + std::to_string(i) + " does not sum to zero");
  }

  Eigen::EigenSolver<Matrix> solver(rates, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::ComplexSpectrum, "eigenvalue computation failed");
  std::vector<double> decay;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> ev = solver.eigenvalues()[i];
    if (std::abs(ev.imag()) > kImagTol * scale)
      throw Error(Errc::ComplexSpectrum, "generator has non-real eigenvalues");
    decay.push_back(std::max(0.0, -ev.real()));
  }
  std::sort(decay.begin(), decay.end());

  // Group numerically equal decay rates.
  std::vector<std::pair<double, int>> groups;
  for (double d : decay) {
    if (!groups.empty() && d - groups.back().first / groups.back().second <= kGroupTol * scale) {
      groups.back().first += d;
      groups.back().second += 1;
    } else {
      groups.emplace_back(d, 1);
    }
  }
  for (auto& [sum, count] : groups) sum /= count;
  groups.front().first = 0.0;
  if (groups.front().second != 1 || groups.size() < 2)
    throw Error(Errc::DegenerateStationary, "stationary distribution is not unique");

  // Sylvester projectors: Π_g = Π_{h≠g} (ℒ + λ_h I)/(λ_h − λ_g).
  const Matrix identity = Matrix::Identity(n, n);
  std::vector<Eigenspace> spectrum;
  Matrix total = Matrix::Zero(n, n);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Matrix proj = identity;
    for (std::size_t h = 0; h < groups.size(); ++h) {
      if (h == g) continue;
      proj = proj * (rates + groups[h].first * identity) / (groups[h].first - groups[g].first);
    }
    if ((proj * proj - proj).cwiseAbs().maxCoeff() > kProjectorTol * std::max(1.0, proj.cwiseAbs().maxCoeff()))
      throw Error(Errc::ComplexSpectrum, "generator is not diagonalizable over the reals");
    total += proj;
    spectrum.push_back(Eigenspace{groups[g].first, std::move(proj), groups[g].second});
  }
  if ((total - identity).cwiseAbs().maxCoeff() > kProjectorTol)
    throw Error(Errc::ComplexSpectrum, "spectral projectors do not resolve the identity");

  Vector pi = spectrum.front().projector.colwise().mean().transpose();
  pi /= pi.sum();
  if (!(pi.minCoeff() > 1e-12))
    throw Error(Errc::DegenerateStationary, "stationary distribution has a zero component");
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  return Generator(rates, SimplexPoint(std::move(pi)), std::move(spectrum));
}

Generator Generator::scaled(double c) const {
  std::vector<Eigenspace> spectrum = spectrum_;
  for (auto& e : spectrum) e.decay_rate *= c;
  return Generator(rates_ * c, stationary_, std::move(spectrum));
}

Generator parent_independent_generator(double psi, const SimplexPoint& pi) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!pi.strictly_positive()) throw Error(Errc::InvalidPi, "pi must be strictly positive");
  const int n = pi.size();
  Matrix rates = psi * (Vector::Ones(n) * pi.weights().transpose() - Matrix::Identity(n, n));
  // Exact zero row sums.
  for (int i = 0; i < n; ++i) rates(i, i) = -(rates.row(i).sum() - rates(i, i));
  return Generator::build(rates);
}

Matrix transition_matrix(const Generator& g, double tau) {
  if (!(tau >= 0.0)) throw Error(Errc::InvalidArgument, "tau must be nonnegative");
  const int n = g.alphabet_size();
  Matrix out = Matrix::Zero(n, n);
  for (const auto& e : g.spectrum()) out += std::exp(-e.decay_rate * tau) * e.projector;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (out(i, j) < 0.0) {
        if (out(i, j) < -1e-12)
          throw Error(Errc::NumericalBreakdown, "negative transition probability after reconstruction");
        out(i, j) = 0.0;
      }
    }
  }
  return out;
}

Embedding::Embedding(Matrix vectors) : vectors_(std::move(vectors)) {
  if (vectors_.rows() < 1 || vectors_.cols() < 1)
    throw Error(Errc::InvalidArgument, "embedding must have at least one token and dimension");
  if (!vectors_.allFinite()) throw Error(Errc::InvalidArgument, "embedding has non-finite entries");
}

double Embedding::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < alphabet_size(); ++a)
    for (int b = a + 1; b < alphabet_size(); ++b)
      best = std::min(best, (vectors_.row(a) - vectors_.row(b)).norm());
  return best;
}

GeneratorEmbedding embedding_from_generator(const Generator& g) {
  const int n = g.alphabet_size();
  const Vector& pi = g.stationary().weights();
  const Vector sqrt_pi = pi.cwiseSqrt();
  // Left-eigenspace projection acting on columns.
  const Matrix p1 = g.spectrum().at(1).projector.transpose();
  const Matrix q_tilde = sqrt_pi.cwiseInverse().asDiagonal() * p1 * sqrt_pi.asDiagonal();

  Eigen::JacobiSVD<Matrix> svd(q_tilde, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cutoff = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 0.0);
  int rank = 0;
  while (rank < sv.size() && sv[rank] > cutoff) ++rank;
  if (rank == 0) throw Error(Errc::RankZero, "dominant eigenspace projection is zero");

  // (Q̃Q̃^T)^{+1/2} Q̃ = U_r V_r^T.
  const Matrix polar = svd.matrixU().leftCols(rank) * svd.matrixV().leftCols(rank).transpose();

  Eigen::ColPivHouseholderQR<Matrix> qr(q_tilde);
  Matrix basis = Matrix(qr.householderQ()).leftCols(rank);
  for (int c = 0; c < rank; ++c) {
    for (int i = 0; i < n; ++i) {
      if (std::abs(basis(i, c)) > 1e-12) {
        if (basis(i, c) < 0.0) basis.col(c) *= -1.0;
        break;
      }
    }
  }
  Matrix q1 = basis.transpose() * polar;
  Matrix vectors(n, rank);
  for (int b = 0; b < n; ++b) vectors.row(b) = (q1.col(b) / sqrt_pi[b]).transpose();
  return GeneratorEmbedding{Embedding(std::move(vectors)), std::move(q1), g.spectral_gap()};
}

namespace {

struct EmbeddingConstruction {
  Vector pi;         // length N = B' + r
  Matrix p_tilde;    // diag(π)^{-1/2} P diag(π)^{1/2}
};

EmbeddingConstruction construct_projection(const Embedding& emb) {
  const int b = emb.alphabet_size();
  if (b < 2) throw Error(Errc::InvalidArgument, "need at least two tokens");
  if (!(emb.min_pairwise_distance() > 1e-12))
    throw Error(Errc::NotInjective, "embedding maps two tokens to the same point");

  const Matrix& w = emb.vectors();
  // Dummy token at a multiple of the longest embedding so that 𝟙 is not
  // orthogonal to the top eigenspace of the augmented Gram matrix.
  int longest = 0;
  for (int i = 1; i < b; ++i)
    if (w.row(i).norm() > w.row(longest).norm()) longest = i;
  if (!(w.row(longest).norm() > 0.0)) throw Error(Errc::NotInjective, "all embeddings are zero");

  const int bp = b + 1;
  Matrix lambda_tilde;
  Vector lambda;
  Matrix v;
  double scale = 2.0;
  for (int attempt = 0;; ++attempt) {
    Matrix w_aug(bp, w.cols());
    w_aug.topRows(b) = w;
    w_aug.row(b) = scale * w.row(longest);
    lambda_tilde = w_aug * w_aug.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(lambda_tilde);
    const Vector& evals = eig.eigenvalues();
    const double top = evals[bp - 1];
    int r = 0;
    for (int i = 0; i < bp; ++i)
      if (evals[i] > 1e-10 * top) ++r;
    lambda = evals.tail(r);
    v = eig.eigenvectors().rightCols(r);
    double top_overlap = 0.0;
    for (int i = 0; i < r; ++i)
      if (lambda[i] >= top * (1.0 - 1e-9)) top_overlap += std::pow(v.col(i).sum(), 2);
    if (std::sqrt(top_overlap) > 1e-3) break;
    if (attempt > 60) throw Error(Errc::BisectionFailure, "could not augment embedding");
    scale *= 2.0;
  }
  const int r = static_cast<int>(lambda.size());
  const Vector ones_proj = v.transpose() * Vector::Ones(bp);
  const double lambda_max = lambda.maxCoeff();

  auto weighted_norm2 = [&](double eta) {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += lambda[i] / (1.0 - lambda[i] / eta) * ones_proj[i] * ones_proj[i];
    return s;
  };
  // Normalization: B'/η + η^{-2} Σ λ_i (V^T𝟙)_i² / (1 − λ_i/η) = 1.
  auto residual = [&](double eta) { return bp / eta + weighted_norm2(eta) / (eta * eta) - 1.0; };
  double lo = lambda_max + 1e-9;
  double hi = 1e12;
  if (!(residual(lo) > 0.0) || !(residual(hi) < 0.0))
    throw Error(Errc::BisectionFailure, "normalization root is not bracketed");
  double eta = 0.5 * (lo + hi);
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    eta = 0.5 * (lo + hi);
    const double f = residual(eta);
    if (std::abs(f) <= 1e-12) {
      converged = true;
      break;
    }
    (f > 0.0 ? lo : hi) = eta;
  }
  if (!converged && std::abs(residual(eta)) > 1e-12)
    throw Error(Errc::BisectionFailure, "normalization bisection did not converge");

  Vector a(r);
  for (int i = 0; i < r; ++i)
    a[i] = std::sqrt(lambda[i] / (1.0 - lambda[i] / eta)) * ones_proj[i] / eta;
  const double a_norm = a.norm();

  // Householder reflection sending −a/‖a‖ to 𝟙/√r.
  const Vector u = -a / a_norm;
  const Vector e = Vector::Constant(r, 1.0 / std::sqrt(static_cast<double>(r)));
  Matrix rot = Matrix::Identity(r, r);
  const Vector h = u - e;
  if (h.norm() > 1e-14) rot -= 2.0 * h * h.transpose() / h.squaredNorm();

  const int total = bp + r;
  Matrix v_tilde(total, r);
  v_tilde.topRows(bp) = v * (lambda / eta).cwiseSqrt().asDiagonal();
  v_tilde.bottomRows(r) = rot * (Vector::Ones(r) - lambda / eta).cwiseSqrt().asDiagonal();

  Vector pi(total);
  pi.head(bp).setConstant(1.0 / eta);
  pi.tail(r).setConstant(a_norm * a_norm / r);
  pi /= pi.sum();

  const Matrix proj = v_tilde * v_tilde.transpose();
  const Vector sqrt_pi = pi.cwiseSqrt();
  if ((proj * sqrt_pi).norm() > 1e-8)
    throw Error(Errc::NumericalBreakdown, "projection is not orthogonal to sqrt(pi)");
  Matrix p_tilde = sqrt_pi.cwiseInverse().asDiagonal() * proj * sqrt_pi.asDiagonal();
  return EmbeddingConstruction{std::move(pi), std::move(p_tilde)};
}

}  // namespace

double max_valid_mu(const Embedding& emb) {
  const auto c = construct_projection(emb);
  double best = 1.0;
  const auto n = c.pi.size();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && c.p_tilde(i, j) < 0.0) best = std::min(best, c.pi[j] / -c.p_tilde(i, j));
  return best;
}

Generator generator_from_embedding(const Embedding& emb, double mu) {
  if (!(mu > 0.0 && mu < 1.0)) throw Error(Errc::NoValidMu, "mu must lie in (0, 1)");
  const auto c = construct_projection(emb);
  const auto n = c.pi.size();
  const Matrix identity = Matrix::Identity(n, n);
  Matrix rates = -(identity - Vector::Ones(n) * c.pi.transpose()) + mu * c.p_tilde;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rates(i, j) < 0.0) {
        if (rates(i, j) < -1e-13) throw Error(Errc::NoValidMu, "mu makes an off-diagonal rate negative");
        rates(i, j) = 0.0;
      }
    }
    rates(i, i) = 0.0;
    rates(i, i) = -rates.row(i).sum();
  }
  return Generator::build(rates);
}

TimeDilation TimeDilation::classical(double epsilon) {
  const double k = 1.0 - epsilon;
  return TimeDilation(
      "classical", [k](double t) { return -0.5 * std::log1p(-t * k); },
      [k](double t) { return 0.5 * k / (1.0 - t * k); });
}

TimeDilation TimeDilation::linear(double c) {
  return TimeDilation(
      "linear", [c](double t) { return c * t; }, [c](double) { return c; });
}

double population_tau(double tau, int zeta) {
  // ½ log(ζe^{2τ} − ζ + 1) written to avoid overflow at large τ.
  return tau + 0.5 * std::log(zeta - (zeta - 1) * std::exp(-2.0 * tau));
}

TimeDilation population_time_dilation(const TimeDilation& base, int zeta) {
  if (zeta < 1) throw Error(Errc::InvalidArgument, "population size must be at least 1");
  return TimeDilation(
      base.name() + "/zeta=" + std::to_string(zeta),
      [base, zeta](double t) { return population_tau(base.tau(t), zeta); },
      [base, zeta](double t) {
        const double tau = base.tau(t);
        return base.rate(t) * zeta / (zeta - (zeta - 1) * std::exp(-2.0 * tau));
      });
}

Vector population_rescale(const Vector& v, const SimplexPoint& pi, int zeta, double tau) {
  const double factor = std::sqrt(zeta - (zeta - 1) * std::exp(-2.0 * tau));
  return factor * (v - pi.weights()).cwiseQuotient(pi.weights().cwiseSqrt());
}

Vector population_unrescale(const Vector& rescaled, const SimplexPoint& pi, int zeta, double tau) {
  const double factor = std::sqrt(zeta - (zeta - 1) * std::exp(-2.0 * tau));
  return pi.weights() + rescaled.cwiseProduct(pi.weights().cwiseSqrt()) / factor;
}

}  // namespace wfdiff
