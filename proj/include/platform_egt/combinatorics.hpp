#ifndef PLATFORM_EGT_COMBINATORICS_HPP
#define PLATFORM_EGT_COMBINATORICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "platform_egt/domain.hpp"

namespace platform_egt {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

inline constexpr int kLogFactorialTableSize = 1024;

inline const std::array<double, kLogFactorialTableSize>& log_factorial_table() {
  static const auto table = [] {
    std::array<double, kLogFactorialTableSize> t{};
    for (int n = 0; n < kLogFactorialTableSize; ++n) t[n] = std::lgamma(static_cast<double>(n) + 1.0);
    return t;
  }();
  return table;
}

}  // namespace detail

inline double log_factorial(int n) {
  if (n < 0) throw DomainError("log_factorial of negative argument");
  if (n < detail::kLogFactorialTableSize) return detail::log_factorial_table()[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

inline double log_choose(int n, int k) {
  if (k < 0 || k > n) throw DomainError("log_choose outside support");
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

// P(X = x) for x marked items among n draws without replacement from a pool
// of N items of which K are marked. Zero outside the support.
inline double hypergeometric_pmf(int N, int K, int n, int x) {
  if (N < 0 || K < 0 || K > N || n < 0 || n > N) {
    throw DomainError("hypergeometric parameters out of bounds (N=" + std::to_string(N) +
                      ", K=" + std::to_string(K) + ", n=" + std::to_string(n) + ")");
  }
  const int lo = std::max(0, n - (N - K));
  const int hi = std::min(n, K);
  if (x < lo || x > hi) return 0.0;
  if (lo == hi) return 1.0;
  return std::exp(log_choose(K, x) + log_choose(N - K, n - x) - log_choose(N, n));
}

// Full support [lo, hi] of the hypergeometric law with its masses.
struct HypergeometricLaw {
  int lo = 0;
  std::vector<double> mass;  // mass[i] = P(X = lo + i)
};

inline HypergeometricLaw hypergeometric_law(int N, int K, int n) {
  HypergeometricLaw law;
  // Validates the parameters.
  (void)hypergeometric_pmf(N, K, n, 0);
  law.lo = std::max(0, n - (N - K));
  const int hi = std::min(n, K);
  law.mass.reserve(static_cast<std::size_t>(hi - law.lo + 1));
  for (int x = law.lo; x <= hi; ++x) law.mass.push_back(hypergeometric_pmf(N, K, n, x));
  return law;
}

// Binomial(n, p) masses over 0..n.
inline std::vector<double> binomial_pmf(int n, double p) {
  if (n < 0) throw DomainError("binomial with negative trials");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial probability outside [0, 1]");
  std::vector<double> mass(static_cast<std::size_t>(n) + 1, 0.0);
  if (p == 0.0) {
    mass.front() = 1.0;
    return mass;
  }
  if (p == 1.0) {
    mass.back() = 1.0;
    return mass;
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  for (int x = 0; x <= n; ++x) {
    mass[static_cast<std::size_t>(x)] = std::exp(log_choose(n, x) + x * lp + (n - x) * lq);
  }
  return mass;
}

}  // namespace platform_egt

#endif  // PLATFORM_EGT_COMBINATORICS_HPP
