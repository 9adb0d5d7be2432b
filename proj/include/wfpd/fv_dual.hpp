#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "wfpd/core.hpp"
#include "wfpd/esf_crp.hpp"
#include "wfpd/measures.hpp"
#include "wfpd/random.hpp"

namespace wfpd {

// Fleming-Viot transition function at time t, sampled through its mixture
// representation: L_t is a pure death process coming down from infinity with
// rates n(n-1+theta)/2, and given L_t = n the state is DP(n + theta, nu_n) with
//   nu_n = (1/(n+theta)) sum_{i<=n} delta_{X_i} + (theta/(n+theta)) pi,
// X_i i.i.d. from the initial measure.

inline double death_rate(std::size_t n, double theta) {
  const double nn = static_cast<double>(n);
  return 0.5 * nn * (nn - 1.0 + theta);
}

/// sum_{m > n} 2 / (m (m + theta - 1)): expected time to descend from infinity to level n.
inline double death_tail_time(std::size_t n, double theta) {
  require_theta(theta);
  const double a = theta - 1.0;
  const double x = static_cast<double>(n) + 1.0;
  if (std::abs(a) < 1e-8) return 2.0 * boost::math::trigamma(x);
  return 2.0 / a * (boost::math::digamma(x + a) - boost::math::digamma(x));
}

/// Smallest n >= 1 whose tail time is below min(trunc_tol, t/100).
inline std::size_t death_entry_level(double theta, double t, double trunc_tol) {
  require_theta(theta);
  if (!(t > 0.0)) throw DomainError("time must be positive");
  if (!(trunc_tol > 0.0)) throw DomainError("trunc_tol must be positive");
  const double target = std::min(trunc_tol, t / 100.0);
  // The tail is at most 2/n, so the answer lies in [1, ceil(2/target)].
  std::size_t lo = 1;
  std::size_t hi = static_cast<std::size_t>(std::ceil(2.0 / target)) + 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (death_tail_time(mid, theta) < target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

/// Holding times Y_n ~ Exp(n(n-1+theta)/2) for n = entry_level..1.
struct DeathProcessPath {
  double theta = 1.0;
  std::size_t entry_level = 0;
  std::vector<double> holding_times;  // holding_times[n-1] is Y_n

  /// L_t on this path; the process sits at entry_level at time 0.
  std::size_t value_at(double t) const {
    double cum = 0.0;
    for (std::size_t n = entry_level; n >= 1; --n) {
      cum += holding_times[n - 1];
      if (cum > t) return n;
    }
    return 0;
  }

  /// T = inf{t : L_t = 0}.
  double absorption_time() const {
    CompensatedSum s;
    for (double y : holding_times) s += y;
    return s.value();
  }
};

inline DeathProcessPath sample_death_path(double theta, std::size_t entry_level, Rng& rng) {
  require_theta(theta);
  DeathProcessPath path{theta, entry_level, std::vector<double>(entry_level)};
  for (std::size_t n = entry_level; n >= 1; --n) path.holding_times[n - 1] = exponential(rng, death_rate(n, theta));
  return path;
}

/// Draws L_t, entering at death_entry_level(theta, t, trunc_tol) at time 0.
/// The entry shortcut moves the clock by the tail time, whose mean is below t/100.
inline std::size_t sample_death_level(double theta, double t, double trunc_tol, Rng& rng) {
  const std::size_t entry = death_entry_level(theta, t, trunc_tol);
  double cum = 0.0;
  for (std::size_t n = entry; n >= 1; --n) {
    cum += exponential(rng, death_rate(n, theta));
    if (cum > t) return n;
  }
  return 0;
}

/// Draws types from an AtomicMeasure; its diffuse part yields fresh types.
class MeasureSampler {
 public:
  explicit MeasureSampler(const AtomicMeasure& mu) : mu_(mu) {
    double acc = 0.0;
    for (const Atom& a : mu.atoms()) {
      acc += a.mass;
      cumulative_.push_back(acc);
    }
  }

  Atom draw(Rng& rng, LabelSource& labels) const {
    const double u = uniform01(rng);
    if (cumulative_.empty() || u >= cumulative_.back()) return Atom{labels.fresh(), uniform01(rng), 0.0};
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return mu_.atoms()[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  const AtomicMeasure& mu_;
  std::vector<double> cumulative_;
};

struct TransitionSample {
  double t = 0.0;
  std::size_t level = 0;  // realized L_t
  AtomicMeasure base;     // nu_L realization; diffuse mass theta/(L+theta)
  AtomicMeasure measure;  // truncated DP(L+theta, base) draw; tail left diffuse
};

/// State of the transition given L_t = level. Atoms drawn from the base
/// component pi get fresh labels; X_i keep the labels of the initial measure.
/// Fresh labels must not collide with labels of `mu`.
inline TransitionSample sample_transition_at_level(const AtomicMeasure& mu, double theta, std::size_t level, Rng& rng,
                                                   LabelSource& labels,
                                                   double residual_tol = kTolerances.gem_residual) {
  require_theta(theta);
  const double total = static_cast<double>(level) + theta;
  MeasureSampler from_mu(mu);
  std::vector<Atom> xs;
  xs.reserve(level);
  for (std::size_t i = 0; i < level; ++i) {
    Atom a = from_mu.draw(rng, labels);
    a.mass = 1.0 / total;
    xs.push_back(a);
  }
  TransitionSample out;
  out.level = level;
  out.base = AtomicMeasure::merged(xs, theta / total);

  const GemDraw sticks = gem_sticks(total, residual_tol, rng);
  std::vector<Atom> entries;
  entries.reserve(sticks.masses.size());
  const double p_fresh = theta / total;
  for (double m : sticks.masses) {
    if (level == 0 || bernoulli(rng, p_fresh)) {
      entries.push_back(Atom{labels.fresh(), uniform01(rng), m});
    } else {
      Atom a = xs[uniform_index(rng, level)];
      a.mass = m;
      entries.push_back(a);
    }
  }
  out.measure = AtomicMeasure::merged(entries, sticks.residual, 1e-9);
  return out;
}

inline TransitionSample sample_transition(const AtomicMeasure& mu, double theta, double t, double trunc_tol, Rng& rng,
                                          LabelSource& labels, double residual_tol = kTolerances.gem_residual) {
  const std::size_t level = sample_death_level(theta, t, trunc_tol, rng);
  TransitionSample s = sample_transition_at_level(mu, theta, level, rng, labels, residual_tol);
  s.t = t;
  return s;
}

}  // namespace wfpd
