#include "wfdiff/wf_series.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <boost/multiprecision/mpfr.hpp>

#include "wfdiff/error.hpp"

namespace wfdiff {

namespace {

using Extended = boost::multiprecision::mpfr_float;
/// Stack-allocated 50-digit type, used when the configured precision is the default.
using Extended50 = boost::multiprecision::number<
    boost::multiprecision::mpfr_float_backend<50, boost::multiprecision::allocate_stack>, boost::multiprecision::et_off>;

void ensure_extended_precision() {
  static std::once_flag once;
  std::call_once(once, [] { Extended::default_precision(extended_precision_digits()); });
}

/// Calls f with a value of the extended type in use.
template <class F>
auto with_extended(F&& f) {
  ensure_extended_precision();
  if (extended_precision_digits() == 50) return f(Extended50());
  return f(Extended());
}

template <class Real>
double to_double(const Real& r) {
  if constexpr (std::is_same_v<Real, double>) {
    return r;
  } else {
    return r.template convert_to<double>();
  }
}

template <class Real>
Real real_exp(const Real& r) {
  using std::exp;
  return exp(r);
}

template <class Real>
Real real_lgamma(const Real& r) {
  using std::lgamma;
  return lgamma(r);
}

template <class Real>
Real real_abs(const Real& r) {
  using std::abs;
  return abs(r);
}

/// Relative size below which trailing terms are dropped.
template <class Real>
double negligible() {
  if constexpr (std::is_same_v<Real, double>) {
    return 1e-30;
  } else {
    return std::pow(10.0, -static_cast<double>(extended_precision_digits()) - 10.0);
  }
}

template <class Real>
struct Partial {
  Real sum;
  Real abs_sum;
  Real last_term;
  int terms = 0;
  bool truncated_early = false;
};

/// Jacobi-type polynomials J_n = ₂F₁(−n, n + a; c; x) by their three-term
/// recurrence in n, which avoids the cancellation of the direct sum.
template <class Real>
class JacobiSequence {
 public:
  JacobiSequence(const Real& a, const Real& c, const Real& x) : y_(Real(1) - 2 * x) {
    const Real alpha = c - 1;
    const Real beta = a - c;
    k_ = alpha * alpha - beta * beta;
    prev_ = Real(1);
    cur_ = Real(1) - (a + 1) * x / c;
    n_ = Real(1);
    two_n_a_ = 2 + a;
    n_a_ = 1 + a;
    n_beta_ = 1 + beta;
    c_n_ = c + 1;
  }

  /// J_n for n = 1, 2, ... on successive calls. With A = 2n + a the step is
  /// J_{n+1} = [(A(A²−1)y + Aκ) J_n − 2n(n+β)(A+1) J_{n−1}] / [2(n+a)(A−1)(c+n)],
  /// κ = α² − β²; the counters are updated exactly.
  Real next() {
    if (!started_) {
      started_ = true;
      return cur_;
    }
    const Real& A = two_n_a_;
    const Real up = A + 1, down = A - 1;
    Real num = A * (up * down * y_ + k_) * cur_ - 2 * n_ * n_beta_ * up * prev_;
    Real next = num / (2 * n_a_ * down * c_n_);
    prev_ = std::move(cur_);
    cur_ = std::move(next);
    n_ += 1;
    two_n_a_ += 2;
    n_a_ += 1;
    n_beta_ += 1;
    c_n_ += 1;
    return cur_;
  }

 private:
  Real y_, k_, prev_, cur_, n_, two_n_a_, n_a_, n_beta_, c_n_;
  bool started_ = false;
};

/// Every derived parameter (ψ ± 1, ψπ, 2k + ψ − 1, ...) is formed in Real:
/// at η ≈ 10^20 a double rounding of ψπ alone changes the sum at O(1).
template <class Real>
Partial<Real> sum_wf_series(bool f_series, double psi_d, double pi_x0, double x, double tau_d, int kmax) {
  const Real psi(psi_d), tau(tau_d);
  const Real a = f_series ? Real(psi + 1) : Real(psi - 1);
  const Real c = f_series ? Real(psi * Real(pi_x0) + 1) : Real(psi * Real(pi_x0));
  JacobiSequence<Real> jacobi(a, c, Real(x));
  Partial<Real> out{Real(1), Real(1), Real(0), 1, false};
  // ratio = (ψ)_{k−1}/k! for G, (ψ)_k/k! for F
  Real ratio = f_series ? psi : Real(1);
  Real rising_arg = f_series ? Real(psi) : Real(psi - 1);  // ψ + k − 1 (F) or ψ + k − 2 (G) at k = 1
  const double tiny = negligible<Real>();
  int small_run = 0;
  // e^{−τk(k+a)/2} by the ratio e^{−τ(a+1)/2}·e^{−τ(k−1)} between successive k
  const Real step_base = real_exp(Real(-tau * (a + 1) / 2));
  const Real decay = real_exp(Real(-tau));
  const Real f_scale = f_series ? Real((psi + 1) * psi) : Real(1);
  Real decay_pow(1), damping(1), weight = 2 + a;  // 2k + a
  for (int k = 1; k <= kmax; ++k) {
    if (k > 1) ratio = ratio * rising_arg / k;
    rising_arg += 1;
    damping *= step_base * decay_pow;
    decay_pow *= decay;
    const Real j = jacobi.next();
    Real outer;
    if (f_series) {
      outer = damping * ratio * weight * (psi + k) / f_scale;
    } else {
      outer = damping * weight * ratio;
    }
    weight += 2;
    const Real term = outer * j;
    out.sum += (k % 2 == 0) ? term : Real(-term);
    out.abs_sum += real_abs(term);
    out.last_term = term;
    out.terms = k + 1;
    const Real envelope = outer * std::max(Real(1), real_abs(j));
    if (envelope <= tiny * std::max(real_abs(out.sum), Real(std::numeric_limits<double>::min()))) {
      if (++small_run >= 3) {
        out.truncated_early = true;
        break;
      }
    } else {
      small_run = 0;
    }
  }
  return out;
}

/// Successive coefficients c_{m,m}, c_{m+1,m}, ... of the pmf series using
/// c_{k+1,m}/c_{km} = (2k+ψ+1)/(2k+ψ−1) · (ψ+m+k−1)/(k−m+1) · e^{−(2k+ψ)τ/2}.
/// The leading coefficient is taken from double-precision lgamma; its
/// rounding is a common factor of every term and does not cancel.
template <class Real>
class AncestralTerms {
 public:
  AncestralTerms(double psi, double tau, int m) : psi_(psi), m_(m), k_(m) {
    using std::exp;
    decay_ = exp(Real(-tau));
    shift_ = exp(Real(-psi_ * Real(tau) / 2));
    term_ = Real(std::exp(log_ancestral_coefficient(psi, tau, m, m)));
    if (m == 0) {
      // (2k+ψ−1)(ψ)_{k−1} at k = 0 is 1; the general ratio starts at k = 1.
      first_zero_ = true;
    }
    power_ = Real(1);
    for (int i = 0; i < m; ++i) power_ *= decay_;  // e^{−kτ} at k = m
  }

  const Real& current() const { return term_; }

  void advance() {
    const double k = k_;
    if (first_zero_) {
      // c_{1,0} = (1+ψ) e^{−ψτ}
      term_ = (1 + psi_) * shift_;
      first_zero_ = false;
    } else {
      term_ = term_ * ((2 * k + psi_ + 1) / (2 * k + psi_ - 1)) * ((psi_ + (m_ + k - 1)) / (k - m_ + 1)) *
              shift_ * power_;
    }
    power_ *= decay_;
    ++k_;
  }

 private:
  Real psi_;
  int m_, k_;
  bool first_zero_ = false;
  Real decay_, shift_, power_, term_;
};

template <class Real>
Partial<Real> sum_ancestral(double psi, double tau, int m, int kmax) {
  Partial<Real> out{Real(0), Real(0), Real(0), 0, false};
  const double tiny = negligible<Real>();
  AncestralTerms<Real> terms(psi, tau, m);
  Real prev_term(0);
  for (int i = 0; i <= kmax; ++i) {
    if (i > 0) terms.advance();
    const Real& term = terms.current();
    out.sum += (i % 2 == 0) ? term : Real(-term);
    out.abs_sum += term;
    out.last_term = term;
    out.terms = i + 1;
    const bool decreasing = i > 0 && term <= prev_term;
    prev_term = term;
    if (decreasing && term <= tiny * std::max(real_abs(out.sum), Real(std::numeric_limits<double>::min()))) {
      out.truncated_early = true;
      break;
    }
  }
  return out;
}

template <class Real>
SeriesResult finish(const Partial<Real>& p, Precision precision) {
  SeriesResult r;
  r.value = to_double(p.sum);
  const double denom = std::max(std::abs(r.value), std::numeric_limits<double>::min());
  r.condition_number = std::max(1.0, to_double(p.abs_sum) / denom);
  r.precision_used = precision;
  r.terms_used = p.terms;
  return r;
}

template <class Real>
bool unconverged(const Partial<Real>& p) {
  if (p.truncated_early) return false;
  const double last = std::abs(to_double(p.last_term));
  const double value = std::abs(to_double(p.sum));
  return last > 1e-10 * std::max(value, std::numeric_limits<double>::min());
}

void check_series_args(double psi, double pi_x0, double x, double tau, int kmax) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(pi_x0 > 0.0 && pi_x0 <= 1.0)) throw Error(Errc::InvalidPi, "pi_x0 must lie in (0, 1]");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(Errc::InvalidArgument, "x must lie in [0, 1]");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error(Errc::InvalidArgument, "tau must be nonnegative");
  if (kmax < 1) throw Error(Errc::InvalidArgument, "kmax must be positive");
}

SeriesResult extended_wf(bool f_series, double psi, double pi_x0, double x, double tau, int kmax) {
  return with_extended([&](auto zero) {
    const auto p = sum_wf_series<decltype(zero)>(f_series, psi, pi_x0, x, tau, kmax);
    if (unconverged(p))
      throw Error(Errc::Unconverged, std::string(f_series ? "F" : "G") + " series did not converge at kmax=" +
                                         std::to_string(kmax) + " (tau=" + std::to_string(tau) + ")");
    return finish(p, Precision::Extended);
  });
}

SeriesResult extended_pmf(double psi, double tau, int m, int kmax) {
  return with_extended([&](auto zero) {
    const auto p = sum_ancestral<decltype(zero)>(psi, tau, m, kmax);
    if (unconverged(p)) throw Error(Errc::Unconverged, "ancestral pmf series did not converge");
    return finish(p, Precision::Extended);
  });
}

/// Standard-precision attempt; nullopt means escalation is required.
std::optional<SeriesResult> standard_attempt(const SeriesRequest& r) {
  if (r.kind == SeriesKind::AncestralPmf) {
    const auto p = sum_ancestral<double>(r.psi, r.tau, r.m, r.kmax);
    auto res = finish(p, Precision::Standard);
    if (unconverged(p) || res.condition_number > kEscalationThreshold) return std::nullopt;
    return res;
  }
  const auto p = sum_wf_series<double>(r.kind == SeriesKind::F, r.psi, r.pi_x0, r.x, r.tau, r.kmax);
  auto res = finish(p, Precision::Standard);
  if (unconverged(p) || res.condition_number > kEscalationThreshold) return std::nullopt;
  return res;
}

SeriesResult extended_attempt(const SeriesRequest& r) {
  if (r.kind == SeriesKind::AncestralPmf) return extended_pmf(r.psi, r.tau, r.m, r.kmax);
  return extended_wf(r.kind == SeriesKind::F, r.psi, r.pi_x0, r.x, r.tau, r.kmax);
}

SeriesResult evaluate(const SeriesRequest& r) {
  if (auto res = standard_attempt(r)) return *res;
  return extended_attempt(r);
}

}  // namespace

unsigned extended_precision_digits() {
  static const unsigned digits = [] {
    unsigned d = 50;
    if (const char* env = std::getenv("WFDIFF_PRECISION_DIGITS")) {
      try {
        d = static_cast<unsigned>(std::stoul(env));
      } catch (const std::exception&) {
        d = 50;
      }
    }
    return std::clamp(d, 50u, 2000u);
  }();
  return digits;
}

double hypergeom_terminating(int k, double b, double c, double x) {
  if (k < 0) throw Error(Errc::InvalidArgument, "k must be nonnegative");
  if (!(c > 0.0)) throw Error(Errc::InvalidC, "c must be positive");
  double term = 1.0;
  double sum = 1.0;
  for (int j = 0; j < k; ++j) {
    term *= (j - k) * (b + j) / ((c + j) * (j + 1)) * x;
    sum += term;
  }
  return sum;
}

double condition_estimate(std::span<const double> terms) {
  if (terms.empty()) throw Error(Errc::InvalidArgument, "no terms");
  double sum = 0.0;
  double abs_sum = 0.0;
  for (double t : terms) {
    sum += t;
    abs_sum += std::abs(t);
  }
  return abs_sum / std::max(std::abs(sum), std::numeric_limits<double>::min());
}

SeriesResult series_G(double psi, double pi_x0, double x, double tau, int kmax) {
  check_series_args(psi, pi_x0, x, tau, kmax);
  return evaluate(SeriesRequest{SeriesKind::G, psi, pi_x0, x, tau, 0, kmax});
}

SeriesResult series_F(double psi, double pi_x0, double x, double tau, int kmax) {
  check_series_args(psi, pi_x0, x, tau, kmax);
  return evaluate(SeriesRequest{SeriesKind::F, psi, pi_x0, x, tau, 0, kmax});
}

SeriesResult series_G_truncated(double psi, double pi_x0, double x, double tau, int kmax, Precision precision) {
  check_series_args(psi, pi_x0, x, tau, kmax);
  if (precision == Precision::Standard) {
    const auto p = sum_wf_series<double>(false, psi, pi_x0, x, tau, kmax);
    auto r = finish(p, precision);
    r.converged = !unconverged(p);
    return r;
  }
  return with_extended([&](auto zero) {
    const auto p = sum_wf_series<decltype(zero)>(false, psi, pi_x0, x, tau, kmax);
    auto r = finish(p, precision);
    r.converged = !unconverged(p);
    return r;
  });
}

SeriesResult series_G_extended(double psi, double pi_x0, double x, double tau, int kmax) {
  check_series_args(psi, pi_x0, x, tau, kmax);
  return extended_wf(false, psi, pi_x0, x, tau, kmax);
}

SeriesResult series_F_extended(double psi, double pi_x0, double x, double tau, int kmax) {
  check_series_args(psi, pi_x0, x, tau, kmax);
  return extended_wf(true, psi, pi_x0, x, tau, kmax);
}

double log_ancestral_coefficient(double psi, double tau, int k, int m) {
  if (k == 0 && m == 0) return 0.0;
  return std::log(2.0 * k + psi - 1.0) + std::lgamma(psi + m + k - 1.0) - std::lgamma(psi + m) -
         std::lgamma(m + 1.0) - std::lgamma(k - m + 1.0) - 0.5 * tau * k * (k + psi - 1.0);
}

SeriesResult ancestral_pmf(double psi, double tau, int m, int kmax) {
  if (!(psi > 0.0)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (m < 0) throw Error(Errc::InvalidArgument, "m must be nonnegative");
  return evaluate(SeriesRequest{SeriesKind::AncestralPmf, psi, 1.0, 0.0, tau, m, kmax});
}

SeriesResult ancestral_pmf_extended(double psi, double tau, int m, int kmax) {
  if (!(psi > 0.0)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (m < 0) throw Error(Errc::InvalidArgument, "m must be nonnegative");
  return extended_pmf(psi, tau, m, kmax);
}

namespace {

template <class Real>
AncestralEnvelope envelope_in(double psi, double tau, int m, Precision precision) {
  constexpr int kScanCap = 100000;
  AncestralEnvelope env;
  env.precision_used = precision;
  const double tiny = negligible<Real>();
  Real sum(0), abs_sum(0), prev_term(0);
  bool monotone = false;
  AncestralTerms<Real> terms(psi, tau, m);
  for (int i = 0; i <= kScanCap; ++i) {
    if (i > 0) terms.advance();
    const Real term = terms.current();
    // c_{k+1,m}/c_{km} is decreasing in k, so once the terms decrease they
    // keep decreasing.
    if (!monotone && i > 0 && term <= prev_term) {
      monotone = true;
      env.monotone_from = i - 1;
    }
    prev_term = term;
    sum += (i % 2 == 0) ? term : Real(-term);
    abs_sum += term;
    env.partial_sums.push_back(to_double(sum));
    if (monotone && term <= tiny * std::max(real_abs(sum), Real(std::numeric_limits<double>::min()))) break;
    if (i == kScanCap) throw Error(Errc::EnvelopeStall, "ancestral coefficients did not decay");
  }
  const double value = std::abs(env.partial_sums.back());
  const double unit = std::is_same_v<Real, double> ? std::numeric_limits<double>::epsilon()
                                                   : std::pow(10.0, -static_cast<double>(extended_precision_digits()));
  env.abs_error = 4.0 * unit * static_cast<double>(env.partial_sums.size()) * to_double(abs_sum) +
                  std::numeric_limits<double>::epsilon() * value;
  env.condition_number = std::max(1.0, to_double(abs_sum) / std::max(value, std::numeric_limits<double>::min()));
  return env;
}

}  // namespace

AncestralEnvelope ancestral_envelope(double psi, double tau, int m, Precision precision) {
  if (!(psi > 0.0)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  if (precision == Precision::Standard) return envelope_in<double>(psi, tau, m, Precision::Standard);
  return with_extended([&](auto zero) { return envelope_in<decltype(zero)>(psi, tau, m, Precision::Extended); });
}

AncestralEnvelope ancestral_envelope(double psi, double tau, int m) {
  if (!(psi > 0.0)) throw Error(Errc::InvalidPsi, "psi must be positive");
  if (!(tau > 0.0)) throw Error(Errc::InvalidArgument, "tau must be positive");
  auto env = envelope_in<double>(psi, tau, m, Precision::Standard);
  if (env.condition_number <= kEscalationThreshold) return env;
  return with_extended([&](auto zero) { return envelope_in<decltype(zero)>(psi, tau, m, Precision::Extended); });
}

namespace {

/// Fixed-capacity blocking queue of request indices.
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::size_t v) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_; });
    items_.push_back(v);
    not_empty_.notify_one();
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  std::optional<std::size_t> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    const std::size_t v = items_.front();
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

 private:
  std::size_t capacity_;
  std::deque<std::size_t> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
};

}  // namespace

std::vector<SeriesResult> evaluate_series_batch(const std::vector<SeriesRequest>& requests, unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(1, requests.size()));
  std::vector<std::optional<SeriesResult>> standard(requests.size());
  std::vector<SeriesResult> out(requests.size());
  std::vector<std::exception_ptr> errors(requests.size());

  std::atomic<std::size_t> next{0};
  auto standard_worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
      try {
        standard[i] = standard_attempt(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        standard[i] = SeriesResult{};
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(standard_worker);
  }

  ensure_extended_precision();
  BoundedQueue queue(64);
  auto extended_worker = [&] {
    while (auto i = queue.pop()) {
      try {
        out[*i] = extended_attempt(requests[*i]);
      } catch (...) {
        errors[*i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(extended_worker);
    for (std::size_t i = 0; i < requests.size(); ++i) {
      if (errors[i]) continue;
      if (standard[i]) {
        out[i] = *standard[i];
      } else {
        queue.push(i);
      }
    }
    queue.close();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace wfdiff
