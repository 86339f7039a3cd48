#pragma once

#include <cstdint>
#include <random>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace wfdiff {

/// Explicit random stream. Engine and distributions are fixed
/// implementations (mt19937_64 + Boost.Random), so a seed reproduces the
/// same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent child stream for cell/sample `index`; used for
  /// data-parallel work that must not depend on scheduling.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x9e3779b9u};
    std::mt19937_64 engine(seq);
    return Rng(engine);
  }

  double uniform() { return boost::random::uniform_01<double>()(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(engine_); }

  double gamma(double shape) {
    return boost::random::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return boost::random::binomial_distribution<std::int64_t, double>(n, p)(engine_);
  }

  int uniform_int(int lo, int hi) {
    return boost::random::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit Rng(const std::mt19937_64& engine) : engine_(engine) {}
  std::mt19937_64 engine_;
};

}  // namespace wfdiff
