#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wfpd/core.hpp"

namespace wfpd {

/// Type identity. Every mutation to a fresh type draws a new label, which
/// makes the diffuse base measure exact for partition statistics.
using Label = std::uint64_t;

class LabelSource {
 public:
  explicit LabelSource(Label first = 0) : next_(first) {}
  Label fresh() { return next_++; }
  Label peek() const { return next_; }

 private:
  Label next_;
};

struct Atom {
  Label label;
  double location;  // draw from the uniform base measure on [0,1]
  double mass;
};

/// Finitely supported probability measure on [0,1], possibly with a diffuse
/// remainder. `diffuse_mass` is mass not carried by any atom; it stands for
/// a draw from the base measure (each sample from it is a fresh type). It is
/// used for the base component of nu_n and for stick-breaking truncation tails.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;  // pure base measure: no atoms, diffuse mass 1

  explicit AtomicMeasure(std::vector<Atom> atoms, double diffuse_mass = 0.0,
                         double tol = kTolerances.mass_sum)
      : atoms_(std::move(atoms)), diffuse_mass_(diffuse_mass) {
    if (diffuse_mass_ < 0.0 || diffuse_mass_ > 1.0 + tol) {
      throw ValidationError("diffuse mass must lie in [0,1]");
    }
    CompensatedSum total;
    total += diffuse_mass_;
    std::vector<Label> labels;
    labels.reserve(atoms_.size());
    for (const Atom& a : atoms_) {
      if (!(a.mass > 0.0) || a.mass > 1.0 + tol) throw ValidationError("atom masses must lie in (0,1]");
      if (a.location < 0.0 || a.location > 1.0) throw ValidationError("atom locations must lie in [0,1]");
      total += a.mass;
      labels.push_back(a.label);
    }
    if (std::abs(total.value() - 1.0) > tol) {
      throw ValidationError("atomic measure masses sum to " + std::to_string(total.value()));
    }
    std::sort(labels.begin(), labels.end());
    if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
      throw ValidationError("atomic measure labels must be distinct");
    }
  }

  static AtomicMeasure point_mass(Label label, double location) {
    return AtomicMeasure({Atom{label, location, 1.0}});
  }

  /// Builds a measure from possibly repeated (label, location, mass) entries,
  /// merging entries that share a label.
  static AtomicMeasure merged(const std::vector<Atom>& entries, double diffuse_mass = 0.0,
                              double tol = kTolerances.mass_sum) {
    std::map<Label, Atom> by_label;
    for (const Atom& a : entries) {
      auto [it, inserted] = by_label.try_emplace(a.label, a);
      if (!inserted) it->second.mass += a.mass;
    }
    std::vector<Atom> atoms;
    atoms.reserve(by_label.size());
    for (auto& [label, atom] : by_label) atoms.push_back(atom);
    return AtomicMeasure(std::move(atoms), diffuse_mass, tol);
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double diffuse_mass() const { return diffuse_mass_; }

  double mass_of(Label label) const {
    for (const Atom& a : atoms_)
      if (a.label == label) return a.mass;
    return 0.0;
  }

  /// <phi, mu>, with the diffuse part contributing `diffuse_integral` = <phi, pi>.
  double integrate(const std::function<double(double)>& phi, double diffuse_integral) const {
    CompensatedSum s;
    for (const Atom& a : atoms_) s += a.mass * phi(a.location);
    s += diffuse_mass_ * diffuse_integral;
    return s.value();
  }

  /// Probability that two independent draws share a type (sum of squared atom masses).
  double match_probability() const {
    CompensatedSum s;
    for (const Atom& a : atoms_) s += a.mass * a.mass;
    return s.value();
  }

 private:
  std::vector<Atom> atoms_;
  double diffuse_mass_ = 1.0;
};

inline void to_json(nlohmann::json& j, const AtomicMeasure& m) {
  j = nlohmann::json::array();
  for (const Atom& a : m.atoms()) j.push_back({{"label", a.label}, {"location", a.location}, {"mass", a.mass}});
}

/// Set partition of {1..n} held as its restricted-growth string (RGS):
/// assignment[i] is the block of element i+1, blocks numbered by first occurrence.
class SetPartition {
 public:
  SetPartition() = default;

  static SetPartition from_rgs(std::vector<std::uint32_t> rgs) {
    if (rgs.empty()) throw ValidationError("set partition must have n >= 1");
    std::uint32_t next = 0;
    for (std::uint32_t b : rgs) {
      if (b > next) throw ValidationError("assignment is not a restricted-growth string");
      if (b == next) ++next;
    }
    SetPartition p;
    p.rgs_ = std::move(rgs);
    p.blocks_ = next;
    return p;
  }

  /// Canonical partition induced by equality of arbitrary keys.
  template <class Key>
  static SetPartition from_keys(std::span<const Key> keys) {
    std::unordered_map<Key, std::uint32_t> seen;
    std::vector<std::uint32_t> rgs;
    rgs.reserve(keys.size());
    for (const Key& k : keys) {
      auto [it, inserted] = seen.try_emplace(k, static_cast<std::uint32_t>(seen.size()));
      rgs.push_back(it->second);
    }
    return from_rgs(std::move(rgs));
  }

  /// Parses the serialized form written by to_string().
  static SetPartition parse(std::string_view s) {
    std::vector<std::uint32_t> rgs;
    if (s.find('.') != std::string_view::npos) {
      std::size_t start = 0;
      while (start <= s.size()) {
        const std::size_t end = std::min(s.find('.', start), s.size());
        const std::string_view tok = s.substr(start, end - start);
        if (tok.empty()) throw ValidationError("malformed partition string");
        std::uint32_t v = 0;
        for (char c : tok) {
          if (c < '0' || c > '9') throw ValidationError("malformed partition string");
          v = v * 10 + static_cast<std::uint32_t>(c - '0');
        }
        rgs.push_back(v);
        start = end + 1;
      }
    } else {
      for (char c : s) rgs.push_back(decode_digit(c));
    }
    return from_rgs(std::move(rgs));
  }

  std::size_t size() const { return rgs_.size(); }
  std::size_t block_count() const { return blocks_; }
  const std::vector<std::uint32_t>& assignment() const { return rgs_; }

  /// Blocks as sets of 1-based elements, in block order.
  std::vector<std::vector<std::size_t>> blocks() const {
    std::vector<std::vector<std::size_t>> out(blocks_);
    for (std::size_t i = 0; i < rgs_.size(); ++i) out[rgs_[i]].push_back(i + 1);
    return out;
  }

  std::vector<std::size_t> block_sizes() const {
    std::vector<std::size_t> sizes(blocks_, 0);
    for (std::uint32_t b : rgs_) ++sizes[b];
    return sizes;
  }

  /// Partition of {1..m} obtained by deleting elements m+1..n.
  SetPartition restrict_to(std::size_t m) const {
    if (m == 0 || m > size()) throw ValidationError("restriction size out of range");
    return from_rgs(std::vector<std::uint32_t>(rgs_.begin(), rgs_.begin() + static_cast<std::ptrdiff_t>(m)));
  }

  /// One character per element (0-9a-zA-Z) while there are at most 62 blocks;
  /// dot-separated decimal indices otherwise.
  std::string to_string() const {
    std::string s;
    if (blocks_ <= 62) {
      s.reserve(rgs_.size());
      for (std::uint32_t b : rgs_) s.push_back(encode_digit(b));
    } else {
      for (std::size_t i = 0; i < rgs_.size(); ++i) {
        if (i) s.push_back('.');
        s += std::to_string(rgs_[i]);
      }
    }
    return s;
  }

  friend bool operator==(const SetPartition&, const SetPartition&) = default;
  friend auto operator<=>(const SetPartition& a, const SetPartition& b) {
    if (auto c = a.rgs_.size() <=> b.rgs_.size(); c != 0) return c;
    return a.rgs_ <=> b.rgs_;
  }

 private:
  static char encode_digit(std::uint32_t b) {
    if (b < 10) return static_cast<char>('0' + b);
    if (b < 36) return static_cast<char>('a' + (b - 10));
    return static_cast<char>('A' + (b - 36));
  }
  static std::uint32_t decode_digit(char c) {
    if (c >= '0' && c <= '9') return static_cast<std::uint32_t>(c - '0');
    if (c >= 'a' && c <= 'z') return static_cast<std::uint32_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'Z') return static_cast<std::uint32_t>(c - 'A' + 36);
    throw ValidationError(std::string("invalid partition character '") + c + "'");
  }

  std::vector<std::uint32_t> rgs_;
  std::size_t blocks_ = 0;
};

/// Canonical form of a partition given as blocks of 1-based elements.
inline SetPartition canonicalize_partition(const std::vector<std::vector<std::size_t>>& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    if (b.empty()) throw ValidationError("blocks must be nonempty");
    n += b.size();
  }
  if (n == 0) throw ValidationError("partition must cover at least one element");
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(n, kUnset);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    for (std::size_t e : blocks[bi]) {
      if (e < 1 || e > n) throw ValidationError("blocks do not cover exactly {1..n}");
      if (owner[e - 1] != kUnset) throw ValidationError("blocks overlap at element " + std::to_string(e));
      owner[e - 1] = bi;
    }
  }
  return SetPartition::from_keys(std::span<const std::size_t>(owner));
}

/// Visits every set partition of {1..n} in lexicographic RGS order.
template <class Visitor>
void for_each_partition(std::size_t n, Visitor&& visit) {
  if (n == 0) throw ValidationError("n must be positive");
  std::vector<std::uint32_t> rgs(n, 0);
  std::vector<std::uint32_t> prefix_max(n, 0);  // max of rgs[0..i]
  while (true) {
    visit(SetPartition::from_rgs(rgs));
    std::size_t i = n - 1;
    while (i > 0 && rgs[i] > prefix_max[i - 1]) --i;
    if (i == 0) return;
    ++rgs[i];
    prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      rgs[j] = 0;
      prefix_max[j] = prefix_max[i];
    }
  }
}

inline std::vector<SetPartition> enumerate_partitions(std::size_t n, std::size_t cap = kTolerances.enumeration_cap) {
  if (n > cap) {
    throw ResourceError("enumeration of partitions of n=" + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  }
  std::vector<SetPartition> out;
  for_each_partition(n, [&](SetPartition p) { out.push_back(std::move(p)); });
  return out;
}

/// Block-size profile: counts[j] = number of blocks of size j.
struct BlockProfile {
  std::size_t n = 0;
  std::map<std::size_t, std::size_t> counts;

  friend bool operator==(const BlockProfile&, const BlockProfile&) = default;
  friend auto operator<=>(const BlockProfile&, const BlockProfile&) = default;
};

inline BlockProfile block_profile(const SetPartition& p) {
  BlockProfile profile{p.size(), {}};
  for (std::size_t s : p.block_sizes()) ++profile.counts[s];
  return profile;
}

/// Ranked masses of a random point of the infinite simplex, truncated:
/// non-increasing masses plus the unassigned tail mass.
struct MassVector {
  std::vector<double> masses;
  double residual = 0.0;

  void validate(double tol = kTolerances.mass_sum) const {
    if (residual < 0.0) throw ValidationError("residual must be non-negative");
    CompensatedSum s;
    s += residual;
    for (std::size_t i = 0; i < masses.size(); ++i) {
      if (!(masses[i] > 0.0) || masses[i] > 1.0) throw ValidationError("masses must lie in (0,1]");
      if (i > 0 && masses[i] > masses[i - 1]) throw ValidationError("masses must be non-increasing");
      s += masses[i];
    }
    if (std::abs(s.value() - 1.0) > tol) throw ValidationError("masses and residual must sum to 1");
  }
};

using PartitionDistribution = std::map<SetPartition, double>;

inline void to_json(nlohmann::json& j, const PartitionDistribution& d) {
  j = nlohmann::json::object();
  for (const auto& [p, prob] : d) j[p.to_string()] = prob;
}

/// Total variation distance (1/2) sum |p - q| between laws on partitions of the same n.
inline double variation_distance(const PartitionDistribution& p, const PartitionDistribution& q,
                                 double tol = kTolerances.distribution_sum) {
  auto check = [&](const PartitionDistribution& d, std::size_t& n) {
    CompensatedSum s;
    for (const auto& [part, prob] : d) {
      if (n == 0) n = part.size();
      if (part.size() != n) throw ValidationError("distribution mixes partitions of different n");
      if (prob < 0.0) throw ValidationError("negative probability");
      s += prob;
    }
    if (std::abs(s.value() - 1.0) > tol) throw ValidationError("distribution does not sum to 1");
  };
  std::size_t np = 0;
  std::size_t nq = 0;
  check(p, np);
  check(q, nq);
  if (np != nq) throw ValidationError("distributions are over partitions of different n");
  CompensatedSum s;
  auto ip = p.begin();
  auto iq = q.begin();
  while (ip != p.end() || iq != q.end()) {
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      s += std::abs(ip->second);
      ++ip;
    } else if (ip == p.end() || iq->first < ip->first) {
      s += std::abs(iq->second);
      ++iq;
    } else {
      s += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return std::clamp(0.5 * s.value(), 0.0, 1.0);
}

/// Empirical law of a sample of partitions.
inline PartitionDistribution empirical_distribution(std::span<const SetPartition> sample) {
  if (sample.empty()) throw ValidationError("empty sample");
  std::map<SetPartition, std::size_t> counts;
  for (const auto& p : sample) ++counts[p];
  PartitionDistribution d;
  const double total = static_cast<double>(sample.size());
  for (const auto& [p, c] : counts) d.emplace(p, static_cast<double>(c) / total);
  return d;
}

}  // namespace wfpd

template <>
struct std::hash<wfpd::SetPartition> {
  std::size_t operator()(const wfpd::SetPartition& p) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (std::uint32_t b : p.assignment()) h = (h ^ b) * 1099511628211ULL;
    return h;
  }
};
