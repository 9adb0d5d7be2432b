#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wfpd/core.hpp"
#include "wfpd/random.hpp"

namespace wfpd {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

template <class T>
MeanSE mean_se(std::span<const T> values) {
  MeanSE out;
  out.count = values.size();
  if (values.empty()) return out;
  CompensatedSum s;
  for (const T& v : values) s += static_cast<double>(v);
  out.mean = s.value() / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  CompensatedSum ss;
  for (const T& v : values) {
    const double d = static_cast<double>(v) - out.mean;
    ss += d * d;
  }
  const double n = static_cast<double>(values.size());
  out.se = std::sqrt(ss.value() / (n - 1.0) / n);
  return out;
}

template <class T>
MeanSE mean_se(const std::vector<T>& values) {
  return mean_se(std::span<const T>(values));
}

/// Least-squares slope of y on x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("ols_slope needs >= 2 paired points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ValidationError("ols_slope: x has no spread");
  return sxy / sxx;
}

/// Empirical quantile with linear interpolation (values are sorted in place).
inline double quantile(std::vector<double>& values, double q) {
  if (values.empty()) throw ValidationError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

/// Multinomial(n, probs) by sequential binomial conditioning.
inline std::vector<std::uint64_t> multinomial(Rng& rng, std::uint64_t n, std::span<const double> probs) {
  std::vector<std::uint64_t> out(probs.size(), 0);
  double remaining_p = 1.0;
  std::uint64_t remaining_n = n;
  for (std::size_t i = 0; i < probs.size() && remaining_n > 0; ++i) {
    if (i + 1 == probs.size() || probs[i] >= remaining_p) {
      out[i] = remaining_n;
      remaining_n = 0;
      break;
    }
    out[i] = binomial(rng, remaining_n, probs[i] / remaining_p);
    remaining_n -= out[i];
    remaining_p -= probs[i];
  }
  return out;
}

/// Half the l1 distance between two probability vectors on a common support.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("tv_distance: size mismatch");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s.value();
}

}  // namespace wfpd
