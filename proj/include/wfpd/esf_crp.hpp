#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wfpd/core.hpp"
#include "wfpd/measures.hpp"
#include "wfpd/random.hpp"

namespace wfpd {

/// Ewens probability of a set partition of {1..n}:
///   theta^k prod_i (n_i - 1)! / (theta)_n,
/// with (theta)_n the rising factorial and n_i the block sizes.
inline double esf_log_set_partition_prob(const SetPartition& pi, double theta) {
  require_theta(theta);
  CompensatedSum s;
  const auto sizes = pi.block_sizes();
  s += static_cast<double>(sizes.size()) * std::log(theta);
  for (std::size_t b : sizes) s += std::lgamma(static_cast<double>(b));
  s += -log_rising_factorial(theta, pi.size());
  return s.value();
}

inline double esf_set_partition_prob(const SetPartition& pi, double theta) {
  return std::exp(esf_log_set_partition_prob(pi, theta));
}

inline PartitionDistribution esf_distribution(std::size_t n, double theta,
                                              std::size_t cap = kTolerances.enumeration_cap) {
  require_theta(theta);
  if (n > cap) throw ResourceError("esf_distribution: n=" + std::to_string(n) + " exceeds enumeration cap");
  PartitionDistribution d;
  CompensatedSum total;
  for_each_partition(n, [&](SetPartition p) {
    const double prob = esf_set_partition_prob(p, theta);
    total += prob;
    d.emplace_hint(d.end(), std::move(p), prob);
  });
  if (std::abs(total.value() - 1.0) > kTolerances.esf_sum) {
    throw NumericalError("ESF probabilities sum to " + std::to_string(total.value()));
  }
  return d;
}

/// Sequential Chinese restaurant process: customer i+1 joins table t with
/// probability size_t/(i+theta) and opens a new table with probability theta/(i+theta).
class CRPState {
 public:
  explicit CRPState(double theta) : theta_(theta) { require_theta(theta); }

  /// Seats one customer; returns the table index it joined.
  std::size_t seat(Rng& rng, LabelSource* labels = nullptr) {
    const double u = uniform01(rng) * (static_cast<double>(step_) + theta_);
    double acc = 0.0;
    for (std::size_t t = 0; t < sizes_.size(); ++t) {
      acc += static_cast<double>(sizes_[t]);
      if (u < acc) {
        ++sizes_[t];
        ++step_;
        return t;
      }
    }
    sizes_.push_back(1);
    table_labels_.push_back(labels ? labels->fresh() : static_cast<Label>(sizes_.size() - 1));
    ++step_;
    return sizes_.size() - 1;
  }

  std::size_t step() const { return step_; }
  double theta() const { return theta_; }
  const std::vector<std::size_t>& table_sizes() const { return sizes_; }
  const std::vector<Label>& table_labels() const { return table_labels_; }

 private:
  double theta_;
  std::size_t step_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<Label> table_labels_;
};

inline SetPartition crp_sample(std::size_t n, double theta, Rng& rng) {
  if (n == 0) throw ValidationError("crp_sample: n must be positive");
  CRPState crp(theta);
  std::vector<std::uint32_t> rgs;
  rgs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rgs.push_back(static_cast<std::uint32_t>(crp.seat(rng)));
  return SetPartition::from_rgs(std::move(rgs));
}

/// Empirical measure (1/n) sum delta_{x_sigma_i} of an n-sample from DP(theta, uniform).
inline AtomicMeasure crp_empirical_measure(std::size_t n, double theta, Rng& rng, LabelSource& labels) {
  if (n == 0) throw ValidationError("crp_empirical_measure: n must be positive");
  CRPState crp(theta);
  for (std::size_t i = 0; i < n; ++i) crp.seat(rng, &labels);
  std::vector<Atom> atoms;
  atoms.reserve(crp.table_sizes().size());
  for (std::size_t t = 0; t < crp.table_sizes().size(); ++t) {
    atoms.push_back(Atom{crp.table_labels()[t], uniform01(rng),
                         static_cast<double>(crp.table_sizes()[t]) / static_cast<double>(n)});
  }
  return AtomicMeasure(std::move(atoms));
}

/// Size-biased (GEM) masses in generation order, before ranking.
struct GemDraw {
  std::vector<double> masses;
  double residual = 1.0;
};

inline GemDraw gem_sticks(double theta, double residual_tol, Rng& rng,
                          std::size_t max_sticks = kTolerances.max_sticks) {
  require_theta(theta);
  if (!(residual_tol > 0.0 && residual_tol < 1.0)) throw DomainError("residual_tol must lie in (0,1)");
  GemDraw draw;
  while (draw.residual >= residual_tol) {
    if (draw.masses.size() >= max_sticks) {
      throw NumericalError("stick breaking did not reach residual " + std::to_string(residual_tol) + " within " +
                           std::to_string(max_sticks) + " sticks");
    }
    const double v = beta_one(rng, theta);
    const double m = v * draw.residual;
    draw.residual -= m;
    if (m > 0.0) draw.masses.push_back(m);
  }
  return draw;
}

/// Truncated PD(theta) draw: GEM masses ranked non-increasingly, tail kept as residual.
inline MassVector gem_stick_breaking(double theta, double residual_tol, Rng& rng,
                                     std::size_t max_sticks = kTolerances.max_sticks) {
  GemDraw draw = gem_sticks(theta, residual_tol, rng, max_sticks);
  std::sort(draw.masses.begin(), draw.masses.end(), std::greater<>());
  return MassVector{std::move(draw.masses), draw.residual};
}

/// Truncated DP(theta, uniform) draw with fresh labels; the tail is left diffuse.
inline AtomicMeasure dp_sample(double theta, double residual_tol, Rng& rng, LabelSource& labels) {
  GemDraw draw = gem_sticks(theta, residual_tol, rng);
  std::vector<Atom> atoms;
  atoms.reserve(draw.masses.size());
  for (double m : draw.masses) atoms.push_back(Atom{labels.fresh(), uniform01(rng), m});
  return AtomicMeasure(std::move(atoms), draw.residual);
}

/// sum_{j != k} P_j P_k over the listed masses.
inline double pair_sum_distinct(std::span<const double> masses) {
  CompensatedSum s1;
  CompensatedSum s2;
  for (double m : masses) {
    s1 += m;
    s2 += m * m;
  }
  return s1.value() * s1.value() - s2.value();
}

/// sum over pairwise distinct j, k, l of P_j P_k P_l.
inline double triple_sum_distinct(std::span<const double> masses) {
  CompensatedSum s1;
  CompensatedSum s2;
  CompensatedSum s3;
  for (double m : masses) {
    s1 += m;
    s2 += m * m;
    s3 += m * m * m;
  }
  const double a = s1.value();
  return a * a * a - 3.0 * a * s2.value() + 2.0 * s3.value();
}

/// E sum_{j != k} P_j P_k under PD(theta): chance a 2-sample gives partition (1,1).
inline double paintbox_pair_moment(double theta) {
  require_theta(theta);
  return theta / (theta + 1.0);
}

/// Chance a 3-sample from PD(theta) gives partition (1,1,1).
inline double paintbox_triple_moment(double theta) {
  require_theta(theta);
  return theta * theta / ((theta + 1.0) * (theta + 2.0));
}

inline double match_probability_dp(double theta) {
  require_theta(theta);
  return 1.0 / (theta + 1.0);
}

/// Two independent draws from W_n (the empirical measure of an n-sample) share a type.
inline double match_probability_empirical(std::size_t n, double theta) {
  require_theta(theta);
  if (n == 0) throw ValidationError("n must be positive");
  const double nn = static_cast<double>(n);
  return 1.0 / nn + (nn - 1.0) / (nn * (theta + 1.0));
}

}  // namespace wfpd
