#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wfpd/core.hpp"
#include "wfpd/measures.hpp"
#include "wfpd/random.hpp"

namespace wfpd {

/// Infinite-alleles mutation structure: a child of a type-x parent mutates
/// with probability p(x) and then takes a type drawn from kappa_x.
///
/// kappa_x is realized either as "always a fresh type" (the diffuse base
/// measure) or as a finite mixture: fresh type with probability `fresh_prob`,
/// otherwise a draw from a weighted table of fixed types. Suprema over the
/// type space cannot be computed from code, so Custom models carry them as
/// metadata for the bounds engine.
class MutationModel {
 public:
  enum class Kind { Pim, Custom };
  enum class Kernel { FreshType, Table };

  struct TableEntry {
    Label label;
    double location;
    double weight;
  };

  using ProbabilityFn = std::function<double(Label, double)>;

  static MutationModel pim(double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("mutation rate must lie in [0,1]");
    MutationModel m;
    m.kind_ = Kind::Pim;
    m.rate_ = rate;
    m.p_sup_ = rate;
    return m;
  }

  /// PIM with rate theta/(2N), the regime of the Dirichlet-process limit.
  static MutationModel pim_for_theta(std::size_t N, double theta) {
    require_theta(theta);
    if (theta > 2.0 * static_cast<double>(N)) throw DomainError("theta/(2N) must not exceed 1");
    return pim(theta / (2.0 * static_cast<double>(N)));
  }

  static MutationModel custom(ProbabilityFn prob, double p_sup, double p_dev_sup, double kernel_dev_sup,
                              double fresh_prob = 1.0, std::vector<TableEntry> table = {}) {
    if (!prob) throw ValidationError("custom mutation model needs a probability function");
    if (!(p_sup >= 0.0 && p_sup <= 1.0)) throw ValidationError("p_sup must lie in [0,1]");
    if (p_dev_sup < 0.0 || kernel_dev_sup < 0.0) throw ValidationError("suprema must be non-negative");
    if (!(fresh_prob >= 0.0 && fresh_prob <= 1.0)) throw ValidationError("fresh_prob must lie in [0,1]");
    if (fresh_prob < 1.0 && table.empty()) throw ValidationError("table kernel needs at least one entry");
    MutationModel m;
    m.kind_ = Kind::Custom;
    m.prob_ = std::move(prob);
    m.p_sup_ = p_sup;
    m.p_dev_sup_ = p_dev_sup;
    m.kernel_dev_sup_ = kernel_dev_sup;
    m.fresh_prob_ = fresh_prob;
    double acc = 0.0;
    for (const auto& e : table) {
      if (!(e.weight > 0.0)) throw ValidationError("table weights must be positive");
      acc += e.weight;
      m.cumulative_.push_back(acc);
      m.min_fresh_label_ = std::max(m.min_fresh_label_, e.label + 1);
    }
    m.table_ = std::move(table);
    return m;
  }

  Kind kind() const { return kind_; }
  Kernel kernel() const { return fresh_prob_ >= 1.0 ? Kernel::FreshType : Kernel::Table; }
  bool is_pim() const { return kind_ == Kind::Pim; }
  double rate() const { return rate_; }
  double p_sup() const { return p_sup_; }
  double fresh_prob() const { return fresh_prob_; }
  const std::vector<TableEntry>& table() const { return table_; }
  Label min_fresh_label() const { return min_fresh_label_; }

  /// sup_x |p(x) - theta/2N|; exact for PIM, user metadata otherwise.
  double p_dev_sup(std::size_t N, double theta) const {
    if (kind_ == Kind::Pim) return std::abs(rate_ - theta / (2.0 * static_cast<double>(N)));
    return p_dev_sup_;
  }
  /// sup_x ||kappa_x - pi||; zero for PIM.
  double kernel_dev_sup() const { return kind_ == Kind::Pim ? 0.0 : kernel_dev_sup_; }

  double probability(Label label, double location) const {
    if (kind_ == Kind::Pim) return rate_;
    const double p = prob_(label, location);
    if (!(p >= 0.0 && p <= p_sup_ + 1e-15)) throw ValidationError("p(x) outside [0, p_sup]");
    return p;
  }

  /// Type of a mutant child: nullopt means a fresh type.
  std::optional<TableEntry> draw_mutant(Rng& rng) const {
    if (fresh_prob_ >= 1.0 || bernoulli(rng, fresh_prob_)) return std::nullopt;
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return table_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), table_.size() - 1)];
  }

 private:
  MutationModel() = default;

  Kind kind_ = Kind::Pim;
  double rate_ = 0.0;
  ProbabilityFn prob_;
  double p_sup_ = 0.0;
  double p_dev_sup_ = 0.0;
  double kernel_dev_sup_ = 0.0;
  double fresh_prob_ = 1.0;
  std::vector<TableEntry> table_;
  std::vector<double> cumulative_;
  Label min_fresh_label_ = 0;
};

class WFPopulation;
struct StepDetail;
inline void wf_advance(WFPopulation& pop, const MutationModel& model, Rng& rng, StepDetail* detail = nullptr);

struct TypeRecord {
  Label label;
  std::size_t count;
  double location;
};

/// N haploid individuals summarized by type counts, sorted by label.
class WFPopulation {
 public:
  WFPopulation(std::size_t N, std::vector<TypeRecord> types, Label next_label, std::size_t generation = 0)
      : N_(N), types_(std::move(types)), next_label_(next_label), generation_(generation) {
    if (N_ == 0) throw ValidationError("population size must be positive");
    std::sort(types_.begin(), types_.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
    std::size_t total = 0;
    for (std::size_t i = 0; i < types_.size(); ++i) {
      if (types_[i].count == 0) throw ValidationError("type counts must be positive");
      if (i > 0 && types_[i].label == types_[i - 1].label) throw ValidationError("type labels must be distinct");
      if (types_[i].label >= next_label_) next_label_ = types_[i].label + 1;
      total += types_[i].count;
    }
    if (total != N_) throw ValidationError("type counts must sum to N");
  }

  /// Every individual carries its own fresh type.
  static WFPopulation all_distinct(std::size_t N, Rng& rng, Label first_label = 0) {
    std::vector<TypeRecord> types;
    types.reserve(N);
    for (std::size_t i = 0; i < N; ++i) types.push_back({first_label + i, 1, uniform01(rng)});
    return WFPopulation(N, std::move(types), first_label + N);
  }

  static WFPopulation monomorphic(std::size_t N, Label label = 0, double location = 0.5) {
    return WFPopulation(N, {{label, N, location}}, label + 1);
  }

  std::size_t size() const { return N_; }
  std::size_t type_count() const { return types_.size(); }
  const std::vector<TypeRecord>& types() const { return types_; }
  std::size_t generation() const { return generation_; }
  Label next_label() const { return next_label_; }

  std::size_t count_of(Label label) const {
    auto it = std::lower_bound(types_.begin(), types_.end(), label,
                               [](const TypeRecord& t, Label l) { return t.label < l; });
    return (it != types_.end() && it->label == label) ? it->count : 0;
  }

  /// W_N = (1/N) sum_i N_i delta_{x_i}.
  AtomicMeasure empirical_measure() const {
    std::vector<Atom> atoms;
    atoms.reserve(types_.size());
    for (const auto& t : types_) {
      atoms.push_back({t.label, t.location, static_cast<double>(t.count) / static_cast<double>(N_)});
    }
    return AtomicMeasure(std::move(atoms));
  }

 private:
  friend void wf_advance(WFPopulation&, const MutationModel&, Rng&, StepDetail*);

  std::size_t N_;
  std::vector<TypeRecord> types_;
  Label next_label_;
  std::size_t generation_;
};

/// Offspring M_i and mutant counts B_i per parental type, plus founded fresh types.
struct StepDetail {
  std::map<Label, std::size_t> offspring;
  std::map<Label, std::size_t> mutations;
  std::vector<Label> new_types;
};

/// One generation in place. Offspring counts are multinomial over current
/// frequencies (sequential binomial conditioning); B_i ~ Bin(M_i, p(x_i)).
inline void wf_advance(WFPopulation& pop, const MutationModel& model, Rng& rng, StepDetail* detail) {
  const std::size_t N = pop.N_;
  pop.next_label_ = std::max(pop.next_label_, model.min_fresh_label());
  std::vector<TypeRecord> next;
  next.reserve(pop.types_.size() + 4);
  bool needs_merge = false;
  std::size_t remaining_children = N;
  std::size_t remaining_parents = N;
  for (const auto& t : pop.types_) {
    std::size_t m = 0;
    if (remaining_children > 0) {
      m = (t.count == remaining_parents)
              ? remaining_children
              : binomial(rng, remaining_children, static_cast<double>(t.count) / static_cast<double>(remaining_parents));
    }
    remaining_children -= m;
    remaining_parents -= t.count;
    const std::size_t b = m > 0 ? binomial(rng, m, model.probability(t.label, t.location)) : 0;
    if (detail) {
      detail->offspring[t.label] = m;
      detail->mutations[t.label] = b;
    }
    if (m > b) next.push_back({t.label, m - b, t.location});
    for (std::size_t k = 0; k < b; ++k) {
      if (auto entry = model.draw_mutant(rng)) {
        next.push_back({entry->label, 1, entry->location});
        needs_merge = true;
      } else {
        const Label fresh = pop.next_label_++;
        next.push_back({fresh, 1, uniform01(rng)});
        if (detail) detail->new_types.push_back(fresh);
      }
    }
  }
  std::sort(next.begin(), next.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
  if (needs_merge) {
    std::vector<TypeRecord> merged;
    merged.reserve(next.size());
    for (const auto& t : next) {
      if (!merged.empty() && merged.back().label == t.label) {
        merged.back().count += t.count;
      } else {
        merged.push_back(t);
      }
    }
    next.swap(merged);
  }
  pop.types_.swap(next);
  ++pop.generation_;
}

inline std::pair<WFPopulation, StepDetail> wf_step(const WFPopulation& pop, const MutationModel& model, Rng& rng) {
  WFPopulation next = pop;
  StepDetail detail;
  wf_advance(next, model, rng, &detail);
  return {std::move(next), std::move(detail)};
}

/// Burn-in adequacy check on the K trace. The last 60% of the trace is cut
/// into 12 batches; the mean over 45-55% is compared with the mean over the
/// final 10%, in units of the batch-mean standard deviation.
struct TraceDiagnostic {
  double middle_mean = 0.0;
  double last_mean = 0.0;
  double standard_error = 0.0;
  bool warning = false;
};

inline TraceDiagnostic diagnose_trace(std::span<const std::size_t> trace) {
  TraceDiagnostic d;
  const std::size_t T = trace.size();
  if (T < 40) return d;
  constexpr std::size_t kBatches = 12;
  std::array<double, kBatches> means{};
  for (std::size_t b = 0; b < kBatches; ++b) {
    const std::size_t begin = T * (8 + b) / 20;
    const std::size_t end = T * (9 + b) / 20;
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += static_cast<double>(trace[i]);
    means[b] = s / static_cast<double>(end - begin);
  }
  // Successive-difference variance estimate, insensitive to a slow trend.
  double v = 0.0;
  for (std::size_t b = 1; b < kBatches; ++b) v += (means[b] - means[b - 1]) * (means[b] - means[b - 1]);
  const double sd = std::sqrt(v / (2.0 * static_cast<double>(kBatches - 1)));
  d.middle_mean = 0.5 * (means[1] + means[2]);
  d.last_mean = 0.5 * (means[10] + means[11]);
  d.standard_error = sd;  // sd(batch)/sqrt(2) per window, two windows
  d.warning = sd > 0.0 && std::abs(d.last_mean - d.middle_mean) > 3.0 * sd;
  return d;
}

struct StationaryRun {
  WFPopulation population;
  std::vector<std::size_t> k_trace;  // K after each generation
  TraceDiagnostic diagnostic;
};

/// Default burn-in: 20 N generations.
inline std::size_t default_burn_in(std::size_t N) { return 20 * N; }

/// Approximate stationary draw: `burn_in` generations from the all-distinct state.
inline StationaryRun wf_stationary_sample(std::size_t N, const MutationModel& model, std::size_t burn_in, Rng& rng) {
  if (burn_in < 1) throw ValidationError("burn_in must be at least 1");
  WFPopulation pop = WFPopulation::all_distinct(N, rng, model.min_fresh_label());
  std::vector<std::size_t> trace;
  trace.reserve(burn_in);
  for (std::size_t g = 0; g < burn_in; ++g) {
    wf_advance(pop, model, rng);
    trace.push_back(pop.type_count());
  }
  TraceDiagnostic diag = diagnose_trace(trace);
  return StationaryRun{std::move(pop), std::move(trace), diag};
}

namespace detail {

// Untyped sample members carried by each surviving lineage.
using Lineages = std::vector<std::vector<std::uint32_t>>;

inline void close_block(std::vector<std::uint32_t>& members, std::vector<std::uint32_t>& block_of,
                        std::uint32_t& next_block) {
  if (members.empty()) return;
  for (std::uint32_t e : members) block_of[e] = next_block;
  ++next_block;
  members.clear();
}

// Groups lineages by parent slot and concatenates their members.
inline Lineages merge_by_slot(Lineages& lineages, const std::vector<std::size_t>& slot, std::size_t slots) {
  Lineages merged(slots);
  for (std::size_t i = 0; i < lineages.size(); ++i) {
    auto& dst = merged[slot[i]];
    auto& src = lineages[i];
    if (dst.size() < src.size()) dst.swap(src);
    dst.insert(dst.end(), src.begin(), src.end());
  }
  return merged;
}

}  // namespace detail

/// Exact draw of the stationary PIM type partition of `sample_size` individuals
/// (default: the whole population) by tracing lineages backward. Per
/// generation each lineage is founded by a mutation with probability `rate`
/// (fixing its members' type), otherwise picks a uniform parent; lineages
/// sharing a parent merge. Generations in which nothing happens are skipped,
/// so only the embedded jump chain is simulated.
inline SetPartition exact_stationary_partition_pim(std::size_t N, double rate, Rng& rng,
                                                   std::size_t sample_size = 0) {
  if (!(rate > 0.0 && rate < 1.0)) throw DomainError("exact sampler needs 0 < mutation_rate < 1");
  const std::size_t n = sample_size == 0 ? N : sample_size;
  if (n > N || N == 0) throw ValidationError("sample size must satisfy 1 <= n <= N");
  const double nn = static_cast<double>(N);
  const double log_stay = std::log1p(-rate);
  // log_distinct[c] = log prod_{j=1}^{c} (1 - j/N)
  std::vector<double> log_distinct(n, 0.0);
  for (std::size_t c = 1; c < n; ++c) log_distinct[c] = log_distinct[c - 1] + std::log1p(-static_cast<double>(c) / nn);

  detail::Lineages lineages(n);
  for (std::uint32_t i = 0; i < n; ++i) lineages[i] = {i};
  std::vector<std::uint32_t> block_of(n, 0);
  std::uint32_t next_block = 0;
  std::vector<std::size_t> slot;
  std::vector<std::size_t> occupied;

  // Assigns parent slots to lineages [from, k) given `slots` already used.
  auto free_parents = [&](std::size_t from, std::size_t k, std::size_t slots) {
    for (std::size_t i = from; i < k; ++i) {
      const double u = uniform01(rng) * nn;
      if (u < static_cast<double>(slots)) {
        slot[i] = std::min(static_cast<std::size_t>(u), slots - 1);
      } else {
        slot[i] = slots++;
      }
    }
    return slots;
  };

  while (lineages.size() >= 2) {
    const std::size_t k = lineages.size();
    const double log_none_mutate = static_cast<double>(k) * log_stay;
    const double p_mutation = -std::expm1(log_none_mutate);
    const double p_collision_only = std::exp(log_none_mutate) * -std::expm1(log_distinct[k - 1]);
    const double u = uniform01(rng) * (p_mutation + p_collision_only);
    slot.assign(k, 0);
    if (u < p_mutation) {
      // First mutated lineage f (truncated geometric), later ones independent.
      const double v = uniform01(rng) * p_mutation;
      std::size_t f = static_cast<std::size_t>(std::floor(std::log1p(-v) / log_stay));
      f = std::min(f, k - 1);
      std::vector<char> mutated(k, 0);
      mutated[f] = 1;
      for (std::size_t i = f + 1; i < k; ++i) mutated[i] = bernoulli(rng, rate) ? 1 : 0;
      detail::Lineages survivors;
      survivors.reserve(k);
      for (std::size_t i = 0; i < k; ++i) {
        if (mutated[i]) {
          detail::close_block(lineages[i], block_of, next_block);
        } else {
          survivors.push_back(std::move(lineages[i]));
        }
      }
      lineages.swap(survivors);
      slot.assign(lineages.size(), 0);
      const std::size_t slots = free_parents(0, lineages.size(), 0);
      lineages = detail::merge_by_slot(lineages, slot, slots);
    } else {
      // No mutation and at least one shared parent: first collision at lineage c.
      const double total = -std::expm1(log_distinct[k - 1]);
      const double v = uniform01(rng) * total;
      std::size_t c = 1;
      while (c < k - 1 && -std::expm1(log_distinct[c]) <= v) ++c;
      for (std::size_t i = 0; i < c; ++i) slot[i] = i;
      slot[c] = uniform_index(rng, c);
      const std::size_t slots = free_parents(c + 1, k, c);
      lineages = detail::merge_by_slot(lineages, slot, slots);
    }
  }
  if (lineages.size() == 1) detail::close_block(lineages[0], block_of, next_block);
  return SetPartition::from_keys(std::span<const std::uint32_t>(block_of));
}

/// Generation-by-generation backward genealogy of the whole population under
/// PIM, with mutations placed on every ancestral edge. Runs until a single
/// ancestor remains; records the ancestor-count path and the number of
/// mutations on edges in generations with more than two ancestors.
struct PimGenealogy {
  SetPartition partition;
  std::vector<std::size_t> ancestor_counts;
  std::uint64_t mutations_above_two = 0;
};

inline PimGenealogy trace_pim_genealogy(std::size_t N, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("trace_pim_genealogy needs 0 <= rate < 1");
  detail::Lineages lineages(N);
  for (std::uint32_t i = 0; i < N; ++i) lineages[i] = {i};
  std::vector<std::uint32_t> block_of(N, 0);
  std::uint32_t next_block = 0;
  PimGenealogy out;
  std::vector<std::size_t> parent_slot(N, 0);
  std::vector<std::uint32_t> stamp(N, 0);
  std::uint32_t epoch = 0;
  std::vector<std::size_t> slot;
  while (true) {
    const std::size_t x = lineages.size();
    out.ancestor_counts.push_back(x);
    if (x <= 1) break;
    for (auto& l : lineages) {
      if (bernoulli(rng, rate)) {
        if (x > 2) ++out.mutations_above_two;
        detail::close_block(l, block_of, next_block);
      }
    }
    ++epoch;
    slot.assign(x, 0);
    std::size_t slots = 0;
    for (std::size_t i = 0; i < x; ++i) {
      const std::size_t parent = uniform_index(rng, N);
      if (stamp[parent] != epoch) {
        stamp[parent] = epoch;
        parent_slot[parent] = slots++;
      }
      slot[i] = parent_slot[parent];
    }
    lineages = detail::merge_by_slot(lineages, slot, slots);
  }
  for (auto& l : lineages) detail::close_block(l, block_of, next_block);
  out.partition = SetPartition::from_keys(std::span<const std::uint32_t>(block_of));
  return out;
}

/// Partition of {1..n} by shared type among n individuals drawn from the
/// population (without replacement unless requested).
inline SetPartition sample_partition(const WFPopulation& pop, std::size_t n, Rng& rng,
                                     bool with_replacement = false) {
  if (n == 0) throw ValidationError("sample size must be positive");
  if (!with_replacement && n > pop.size()) throw ValidationError("sample size exceeds population size");
  std::vector<std::size_t> counts;
  counts.reserve(pop.type_count());
  for (const auto& t : pop.types()) counts.push_back(t.count);
  std::size_t total = pop.size();
  std::vector<std::size_t> keys;
  keys.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t r = uniform_index(rng, total);
    std::size_t i = 0;
    while (r >= counts[i]) r -= counts[i++];
    keys.push_back(i);
    if (!with_replacement) {
      --counts[i];
      --total;
    }
  }
  return SetPartition::from_keys(std::span<const std::size_t>(keys));
}

/// Plug-in moments of the number of types with jackknife standard errors.
struct KMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double mean_k32 = 0.0;  // E[K^{3/2}]
  double mean_k2 = 0.0;   // E[K^2]
  double se_mean = 0.0;
  double se_k32 = 0.0;
  double se_k2 = 0.0;
  bool jensen_consistent = true;  // E[K^{3/2}] <= E[K^2]^{3/4}
};

namespace detail {

// Jackknife standard error of a sample mean from its leave-one-out means.
inline double jackknife_se_of_mean(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  CompensatedSum total;
  for (double x : v) total += x;
  const double t = total.value();
  const double nn = static_cast<double>(n);
  double mean_loo = 0.0;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = (t - v[i]) / (nn - 1.0);
    mean_loo += loo[i];
  }
  mean_loo /= nn;
  double ss = 0.0;
  for (double l : loo) ss += (l - mean_loo) * (l - mean_loo);
  return std::sqrt((nn - 1.0) / nn * ss);
}

}  // namespace detail

inline KMoments k_moments(std::span<const std::size_t> ks) {
  if (ks.empty()) throw ValidationError("k_moments needs at least one sample");
  std::vector<double> k1;
  std::vector<double> k32;
  std::vector<double> k2;
  for (std::size_t k : ks) {
    const double x = static_cast<double>(k);
    k1.push_back(x);
    k32.push_back(x * std::sqrt(x));
    k2.push_back(x * x);
  }
  auto mean = [](const std::vector<double>& v) {
    CompensatedSum s;
    for (double x : v) s += x;
    return s.value() / static_cast<double>(v.size());
  };
  KMoments m;
  m.count = ks.size();
  m.mean = mean(k1);
  m.mean_k32 = mean(k32);
  m.mean_k2 = mean(k2);
  m.se_mean = detail::jackknife_se_of_mean(k1);
  m.se_k32 = detail::jackknife_se_of_mean(k32);
  m.se_k2 = detail::jackknife_se_of_mean(k2);
  m.jensen_consistent = m.mean_k32 <= std::pow(m.mean_k2, 0.75) * (1.0 + 1e-12);
  return m;
}

inline KMoments k_moments(std::span<const WFPopulation> pops) {
  std::vector<std::size_t> ks;
  ks.reserve(pops.size());
  for (const auto& p : pops) ks.push_back(p.type_count());
  return k_moments(ks);
}

}  // namespace wfpd
