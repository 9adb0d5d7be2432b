#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <vector>

#include "wfpd/core.hpp"
#include "wfpd/random.hpp"

namespace wfpd {

/// Triangle of log S(j,i), Stirling numbers of the second kind, for j <= max_j,
/// filled by S(j,i) = i S(j-1,i) + S(j-1,i-1) in log space.
class StirlingTable {
 public:
  explicit StirlingTable(std::size_t max_j) : max_j_(max_j), rows_(max_j + 1) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    rows_[0] = {0.0};
    for (std::size_t j = 1; j <= max_j; ++j) {
      auto& row = rows_[j];
      const auto& prev = rows_[j - 1];
      row.assign(j + 1, kNegInf);
      for (std::size_t i = 1; i <= j; ++i) {
        const double stay = i < prev.size() ? std::log(static_cast<double>(i)) + prev[i] : kNegInf;
        row[i] = log_sum_exp(stay, prev[i - 1]);
      }
    }
  }

  std::size_t max_j() const { return max_j_; }

  double log_s(std::size_t j, std::size_t i) const {
    if (i > j) throw DomainError("stirling2: i > j");
    if (j > max_j_) throw DomainError("stirling2: j beyond table");
    return rows_[j][i];
  }

 private:
  std::size_t max_j_;
  std::vector<std::vector<double>> rows_;
};

/// Process-wide cache of kTolerances.stirling_cache_rows rows, built on first use.
inline const StirlingTable& stirling_cache() {
  static const StirlingTable table(kTolerances.stirling_cache_rows);
  return table;
}

/// log S(j,i). S(0,0) = 1 and S(j,0) = 0 for j > 0 (log = -inf).
inline double stirling2_log(std::size_t j, std::size_t i) {
  if (i > j) throw DomainError("stirling2_log: require i <= j");
  const auto& cache = stirling_cache();
  if (j <= cache.max_j()) return cache.log_s(j, i);
  return StirlingTable(j).log_s(j, i);
}

/// P(X_{n+1} = i | X_n = j) = N^{-j} S(j,i) C(N,i) i! for the ancestral count chain.
inline double ancestral_transition_prob(std::size_t N, std::size_t j, std::size_t i) {
  if (!(i >= 1 && i <= j && j <= N)) throw DomainError("ancestral_transition_prob: require 1 <= i <= j <= N");
  const double lp = stirling2_log(j, i) + log_falling_factorial(N, i) -
                    static_cast<double>(j) * std::log(static_cast<double>(N));
  return std::exp(lp);
}

/// Throws j balls into N bins and counts occupied bins, reusing a stamp buffer.
class OccupancySampler {
 public:
  explicit OccupancySampler(std::size_t N) : stamp_(N, 0) {}

  std::size_t occupied(std::size_t j, Rng& rng) {
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
    const std::size_t N = stamp_.size();
    std::uniform_int_distribution<std::size_t> bin(0, N - 1);
    std::size_t count = 0;
    for (std::size_t b = 0; b < j; ++b) {
      auto& s = stamp_[bin(rng)];
      if (s != epoch_) {
        s = epoch_;
        ++count;
      }
    }
    return count;
  }

  std::size_t population() const { return stamp_.size(); }

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

inline std::size_t ancestral_step(std::size_t N, std::size_t j, Rng& rng) {
  if (!(j >= 1 && j <= N)) throw DomainError("ancestral_step: require 1 <= j <= N");
  OccupancySampler s(N);
  return s.occupied(j, rng);
}

/// Backward ancestor-count path X_0 = start, X_1, ... ending at the first X_n <= floor.
struct AncestralTrace {
  std::size_t N = 0;
  std::vector<std::size_t> path;

  std::size_t generations() const { return path.size(); }
};

inline AncestralTrace simulate_trace(std::size_t N, std::size_t start, std::size_t floor, Rng& rng,
                                     OccupancySampler* sampler = nullptr) {
  if (floor < 1) throw DomainError("simulate_trace: floor must be >= 1");
  if (start < 1 || start > N) throw DomainError("simulate_trace: require 1 <= start <= N");
  std::unique_ptr<OccupancySampler> owned;
  if (sampler == nullptr || sampler->population() != N) {
    owned = std::make_unique<OccupancySampler>(N);
    sampler = owned.get();
  }
  AncestralTrace trace{N, {start}};
  std::size_t x = start;
  while (x > floor) {
    x = sampler->occupied(x, rng);
    trace.path.push_back(x);
  }
  return trace;
}

/// tau: generations with X_n in (x,y]; edges: sum of X_n over those generations.
struct IntervalStats {
  std::size_t x = 0;
  std::size_t y = 0;
  std::uint64_t tau = 0;
  std::uint64_t edges = 0;
};

inline IntervalStats interval_stats(const AncestralTrace& trace, std::size_t x, std::size_t y) {
  if (!(x >= 2 && x < y && y <= trace.N)) throw DomainError("interval_stats: require 2 <= x < y <= N");
  IntervalStats s{x, y, 0, 0};
  for (std::size_t v : trace.path) {
    if (v > x && v <= y) {
      ++s.tau;
      s.edges += v;
    }
  }
  if (s.edges > static_cast<std::uint64_t>(y) * s.tau) throw NumericalError("edge count exceeds y * tau");
  return s;
}

/// Upper bound on E[tau_{x,y}^2 | X_0 = N]: 21 + 85 (6N(y-x+1) / (x(x-1)))^2.
inline double durint_bound(std::size_t N, std::size_t x, std::size_t y) {
  if (!(x >= 2 && x < y && y <= N)) throw DomainError("durint_bound: require 2 <= x < y <= N");
  const double r = 6.0 * static_cast<double>(N) * static_cast<double>(y - x + 1) /
                   (static_cast<double>(x) * static_cast<double>(x - 1));
  return 21.0 + 85.0 * r * r;
}

/// Upper bound on E[E_{L,N}^2 | X_0 = N]: 6e6 (N log N)^2.
inline double numedges_bound(std::size_t N) {
  if (N < 3) throw DomainError("numedges_bound: require N >= 3");
  const double v = static_cast<double>(N) * std::log(static_cast<double>(N));
  return 6e6 * v * v;
}

/// Expected number of bins holding at least two of x balls thrown into N bins.
inline double occupancy_ge2_mean(std::size_t N, std::size_t x) {
  if (!(x >= 2 && x <= N)) throw DomainError("occupancy_ge2_mean: require 2 <= x <= N");
  const double n = static_cast<double>(N);
  const double xx = static_cast<double>(x);
  const double log_q = std::log1p(-1.0 / n);
  return n * (1.0 - (xx / n) * std::exp((xx - 1.0) * log_q) - std::exp(xx * log_q));
}

}  // namespace wfpd
