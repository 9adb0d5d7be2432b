#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace wfpd {

// Error hierarchy. The CLI maps ValidationError/DomainError to exit code 1
// and ResourceError/NumericalError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Every tolerance and size cap used by the library lives here.
struct Tolerances {
  double mass_sum = 1e-12;           // AtomicMeasure / MassVector normalization
  double distribution_sum = 1e-9;    // inputs to variation_distance
  double esf_sum = 1e-10;            // exact ESF normalization
  double transition_sum = 1e-10;     // ancestral transition rows
  std::size_t enumeration_cap = 12;  // Bell(12) = 4,213,597
  double gem_residual = 1e-10;
  std::size_t max_sticks = 1'000'000;
  std::size_t stirling_cache_rows = 2000;
  double fv_truncation = 1e-2;
};

inline constexpr Tolerances kTolerances{};

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// log of the rising factorial theta (theta+1) ... (theta+n-1).
inline double log_rising_factorial(double theta, std::size_t n) {
  CompensatedSum s;
  for (std::size_t i = 0; i < n; ++i) s += std::log(theta + static_cast<double>(i));
  return s.value();
}

/// log of n (n-1) ... (n-k+1); -inf when k > n.
inline double log_falling_factorial(std::size_t n, std::size_t k) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(n - k) + 1.0);
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline void require_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw DomainError("theta must be a finite positive number, got " + std::to_string(theta));
  }
}

}  // namespace wfpd
