#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "wfpd/core.hpp"
#include "wfpd/esf_crp.hpp"
#include "wfpd/fv_dual.hpp"
#include "wfpd/genealogy.hpp"
#include "wfpd/measures.hpp"
#include "wfpd/random.hpp"
#include "wfpd/stats.hpp"
#include "wfpd/stein_bounds.hpp"
#include "wfpd/wright_fisher.hpp"

namespace wfpd {

struct RunOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string csv_dir;  // empty: no CSV output
};

/// 64-bit FNV-1a; names experiment RNG streams.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// SHA-1 of "blob <len>\0<content>", as git computes object ids.
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  const std::string blob = header + std::string(content);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw ResourceError("SHA-1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

struct ExperimentManifest {
  std::string id;
  nlohmann::json params;  // includes the seed
  std::string hash;

  static ExperimentManifest make(std::string id, nlohmann::json params, std::uint64_t seed) {
    params["seed"] = seed;
    nlohmann::json config{{"id", id}, {"params", params}};
    return ExperimentManifest{std::move(id), std::move(params), git_blob_hash(config.dump())};
  }
};

inline void to_json(nlohmann::json& j, const ExperimentManifest& m) {
  j = {{"id", m.id}, {"params", m.params}, {"hash", m.hash}};
}

namespace detail {

inline void write_csv(const RunOptions& opts, const std::string& name, const std::string& body) {
  if (opts.csv_dir.empty()) return;
  std::filesystem::create_directories(opts.csv_dir);
  const auto path = std::filesystem::path(opts.csv_dir) / (name + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << body;
}

inline std::string cell_key(std::string_view experiment, const nlohmann::json& cell) {
  return std::string(experiment) + ":" + cell.dump();
}

inline std::uint64_t stream_for(std::string_view experiment, const nlohmann::json& cell) {
  return fnv1a(cell_key(experiment, cell));
}

inline void require_reps(std::size_t reps, std::size_t minimum = 1000) {
  if (reps < minimum) throw ValidationError("reps must be at least " + std::to_string(minimum));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// TV distance between WF sample partitions and the ESF

enum class StationarySource { Exact, Forward };

inline std::string to_string(StationarySource s) { return s == StationarySource::Exact ? "exact" : "forward"; }

struct TVEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t reps = 0;
  std::string exact_id;  // names the reference law
  double bias_bound = 0.0;
  std::vector<std::pair<std::string, double>> frequencies;  // partition, empirical frequency
};

inline void to_json(nlohmann::json& j, const TVEstimate& t) {
  nlohmann::json freq = nlohmann::json::object();
  for (const auto& [k, v] : t.frequencies) freq[k] = v;
  j = {{"estimate", t.estimate}, {"ci95", {t.ci_low, t.ci_high}}, {"reps", t.reps},
       {"exact_id", t.exact_id}, {"bias_bound", t.bias_bound}, {"frequencies", freq}};
}

/// Plug-in TV between the counts' empirical law and `exact`, with a
/// percentile bootstrap interval over replicates.
inline TVEstimate tv_from_counts(const std::vector<std::uint64_t>& counts, const std::vector<double>& exact,
                                 std::size_t bootstrap, Rng& rng) {
  TVEstimate out;
  std::uint64_t reps = 0;
  for (auto c : counts) reps += c;
  const double r = static_cast<double>(reps);
  std::vector<double> freq(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) freq[i] = static_cast<double>(counts[i]) / r;
  out.estimate = std::clamp(tv_distance(freq, exact), 0.0, 1.0);
  out.reps = reps;
  out.bias_bound = std::sqrt(static_cast<double>(counts.size()) / (4.0 * r));
  if (bootstrap > 0) {
    std::vector<double> stats;
    stats.reserve(bootstrap);
    std::vector<double> resampled(counts.size());
    for (std::size_t b = 0; b < bootstrap; ++b) {
      const auto draw = multinomial(rng, reps, freq);
      for (std::size_t i = 0; i < draw.size(); ++i) resampled[i] = static_cast<double>(draw[i]) / r;
      stats.push_back(tv_distance(resampled, exact));
    }
    out.ci_low = std::min(quantile(stats, 0.025), out.estimate);
    out.ci_high = std::max(quantile(stats, 0.975), out.estimate);
  } else {
    out.ci_low = out.ci_high = out.estimate;
  }
  return out;
}

struct TVOptions {
  StationarySource source = StationarySource::Exact;
  std::size_t burn_in = 0;  // forward source only; 0 means default_burn_in(N)
  std::size_t bootstrap = 1000;
};

inline TVEstimate estimate_tv_wf_vs_esf(std::size_t N, double theta, std::size_t n, std::size_t reps,
                                        const RunOptions& opts, const TVOptions& tv = {}) {
  if (n > 8) throw ResourceError("estimate_tv_wf_vs_esf: n <= 8 required for the exact ESF side");
  if (n < 1 || n > N) throw ValidationError("sample size must lie in [1, N]");
  detail::require_reps(reps);
  const MutationModel model = MutationModel::pim_for_theta(N, theta);
  if (tv.source == StationarySource::Exact && !(model.rate() < 1.0)) {
    throw ValidationError("exact sampler needs theta < 2N");
  }
  const auto parts = enumerate_partitions(n);
  std::unordered_map<SetPartition, std::uint16_t> index;
  std::vector<double> exact;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    index.emplace(parts[i], static_cast<std::uint16_t>(i));
    exact.push_back(esf_set_partition_prob(parts[i], theta));
  }
  const nlohmann::json cell{{"N", N}, {"theta", theta}, {"n", n}, {"source", to_string(tv.source)}};
  const std::uint64_t stream = detail::stream_for("tv_wf_esf", cell);
  const std::size_t burn = tv.burn_in ? tv.burn_in : default_burn_in(N);
  const auto draws = run_replicates<std::uint16_t>(reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) {
    if (tv.source == StationarySource::Exact) {
      return index.at(exact_stationary_partition_pim(N, model.rate(), rng, n));
    }
    const auto run = wf_stationary_sample(N, model, burn, rng);
    return index.at(sample_partition(run.population, n, rng));
  });
  std::vector<std::uint64_t> counts(parts.size(), 0);
  for (auto d : draws) ++counts[d];
  Rng boot = make_rng(opts.seed, stream, std::uint64_t{1} << 48);
  TVEstimate out = tv_from_counts(counts, exact, tv.bootstrap, boot);
  std::ostringstream id;
  id << "esf(n=" << n << ",theta=" << theta << ")";
  out.exact_id = id.str();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.frequencies.emplace_back(parts[i].to_string(), static_cast<double>(counts[i]) / static_cast<double>(reps));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification reports. Each returns {"id", "manifest", "pass", "cells", ...}.

namespace detail {

inline nlohmann::json report(const std::string& id, nlohmann::json params, const RunOptions& opts) {
  const auto manifest = ExperimentManifest::make(id, std::move(params), opts.seed);
  return {{"id", id}, {"manifest", manifest}, {"cells", nlohmann::json::array()}, {"pass", true}};
}

inline void add_cell(nlohmann::json& rep, nlohmann::json cell, bool pass) {
  cell["pass"] = pass;
  rep["cells"].push_back(std::move(cell));
  if (!pass) rep["pass"] = false;
}

}  // namespace detail

/// Sum of ESF probabilities over all set partitions.
inline nlohmann::json verify_esf_normalization(std::size_t n_max, const std::vector<double>& thetas,
                                               const RunOptions& opts, double tol = kTolerances.esf_sum) {
  auto rep = detail::report("esf_normalization", {{"n_max", n_max}, {"thetas", thetas}, {"tol", tol}}, opts);
  for (double theta : thetas) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      CompensatedSum s;
      for_each_partition(n, [&](const SetPartition& p) { s += esf_set_partition_prob(p, theta); });
      const double err = std::abs(s.value() - 1.0);
      detail::add_cell(rep, {{"n", n}, {"theta", theta}, {"abs_error", err}}, err <= tol);
    }
  }
  return rep;
}

/// TV between the CRP empirical partition law and the ESF.
inline nlohmann::json verify_crp_esf(std::size_t n, double theta, std::size_t reps, const RunOptions& opts,
                                     double max_tv = 0.01) {
  detail::require_reps(reps);
  auto rep = detail::report("crp_esf", {{"n", n}, {"theta", theta}, {"reps", reps}, {"max_tv", max_tv}}, opts);
  const auto parts = enumerate_partitions(n);
  std::unordered_map<SetPartition, std::uint16_t> index;
  std::vector<double> exact;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    index.emplace(parts[i], static_cast<std::uint16_t>(i));
    exact.push_back(esf_set_partition_prob(parts[i], theta));
  }
  const std::uint64_t stream = detail::stream_for("crp_esf", {{"n", n}, {"theta", theta}});
  const auto draws = run_replicates<std::uint16_t>(
      reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) { return index.at(crp_sample(n, theta, rng)); });
  std::vector<double> freq(parts.size(), 0.0);
  for (auto d : draws) freq[d] += 1.0;
  for (auto& f : freq) f /= static_cast<double>(reps);
  const double tv = tv_distance(freq, exact);
  detail::add_cell(rep,
                   {{"n", n},
                    {"theta", theta},
                    {"tv", tv},
                    {"bias_bound", std::sqrt(static_cast<double>(parts.size()) / (4.0 * static_cast<double>(reps)))}},
                   tv <= max_tv);
  return rep;
}

/// Monte Carlo pair and triple paintbox moments against their closed forms.
inline nlohmann::json verify_paintbox(const std::vector<double>& thetas, std::size_t reps, const RunOptions& opts,
                                      double residual_tol = kTolerances.gem_residual) {
  detail::require_reps(reps);
  auto rep = detail::report("paintbox", {{"thetas", thetas}, {"reps", reps}, {"residual_tol", residual_tol}}, opts);
  for (double theta : thetas) {
    const std::uint64_t stream = detail::stream_for("paintbox", {{"theta", theta}});
    const auto draws = run_replicates<std::pair<double, double>>(reps, opts.seed, stream, opts.threads,
                                                                 [&](Rng& rng, std::size_t) {
                                                                   const auto g = gem_sticks(theta, residual_tol, rng);
                                                                   return std::pair{pair_sum_distinct(g.masses),
                                                                                    triple_sum_distinct(g.masses)};
                                                                 });
    std::vector<double> pairs;
    std::vector<double> triples;
    pairs.reserve(reps);
    triples.reserve(reps);
    for (const auto& [a, b] : draws) {
      pairs.push_back(a);
      triples.push_back(b);
    }
    const auto mp = mean_se(pairs);
    const auto mt = mean_se(triples);
    const double slack = 2.0 * residual_tol;
    const double ep = paintbox_pair_moment(theta);
    const double et = paintbox_triple_moment(theta);
    const bool pass = std::abs(mp.mean - ep) <= 5.0 * mp.se + slack && std::abs(mt.mean - et) <= 5.0 * mt.se + slack;
    detail::add_cell(rep,
                     {{"theta", theta},
                      {"pair", {{"mean", mp.mean}, {"se", mp.se}, {"exact", ep}}},
                      {"triple", {{"mean", mt.mean}, {"se", mt.se}, {"exact", et}}}},
                     pass);
  }
  return rep;
}

/// Balls-in-bins occupancy law against the Stirling-number transition probabilities.
inline nlohmann::json verify_transition_law(const std::vector<std::pair<std::size_t, std::size_t>>& cells,
                                            std::size_t reps, const RunOptions& opts, double max_tv = 0.01) {
  detail::require_reps(reps);
  auto rep = detail::report("ancestral_transition", {{"cells", cells}, {"reps", reps}, {"max_tv", max_tv}}, opts);
  for (auto [N, j] : cells) {
    if (!(j >= 1 && j <= N)) throw ValidationError("transition cell needs 1 <= j <= N");
    const std::uint64_t stream = detail::stream_for("ancestral_transition", {{"N", N}, {"j", j}});
    const auto draws = run_replicates<std::uint32_t>(reps, opts.seed, stream, opts.threads,
                                                     [&](Rng& rng, std::size_t) {
                                                       return static_cast<std::uint32_t>(ancestral_step(N, j, rng));
                                                     });
    std::vector<double> freq(j + 1, 0.0);
    for (auto d : draws) freq[d] += 1.0 / static_cast<double>(reps);
    std::vector<double> exact(j + 1, 0.0);
    for (std::size_t i = 1; i <= j; ++i) exact[i] = ancestral_transition_prob(N, j, i);
    const double tv = tv_distance(freq, exact);
    detail::add_cell(rep, {{"N", N}, {"j", j}, {"tv", tv}}, tv <= max_tv);
  }
  return rep;
}

/// Three (x, y) intervals per N used by the genealogy checks.
inline std::vector<std::pair<std::size_t, std::size_t>> default_intervals(std::size_t N) {
  return {{2, N}, {5, 20}, {N / 4, N / 2}};
}

struct GenealogyOptions {
  double tau_inflation = 1.0;  // harness self-test: scales every tau before squaring
  std::size_t floor = 2;
};

/// Second moments of tau_{x,y} and E_{2,N} along backward ancestor-count
/// traces started at N, against their closed-form bounds (mean + 3 SE).
inline nlohmann::json verify_genealogy_bounds(
    const std::vector<std::size_t>& N_list,
    const std::function<std::vector<std::pair<std::size_t, std::size_t>>(std::size_t)>& intervals,
    std::size_t reps, const RunOptions& opts, const GenealogyOptions& g = {}) {
  detail::require_reps(reps);
  nlohmann::json interval_params = nlohmann::json::object();
  for (std::size_t N : N_list) interval_params[std::to_string(N)] = intervals(N);
  auto rep = detail::report("genealogy_bounds",
                            {{"N", N_list}, {"intervals", interval_params}, {"reps", reps},
                             {"tau_inflation", g.tau_inflation}, {"floor", g.floor}},
                            opts);
  std::ostringstream csv;
  csv << "N,replicate,x,y,tau,edges\n";
  for (std::size_t N : N_list) {
    if (N < 3) throw DomainError("genealogy bounds need N >= 3");
    auto ivs = intervals(N);
    for (auto [x, y] : ivs) {
      if (!(x >= g.floor && x < y && y <= N)) throw ValidationError("interval needs floor <= x < y <= N");
    }
    ivs.emplace_back(2, N);  // E_{2,N}
    const std::uint64_t stream = detail::stream_for("genealogy_bounds", {{"N", N}});
    const auto draws = run_replicates<std::vector<IntervalStats>>(
        reps, opts.seed, stream, opts.threads,
        [&](Rng& rng, std::size_t) {
          const auto trace = simulate_trace(N, N, g.floor, rng);
          std::vector<IntervalStats> s;
          s.reserve(ivs.size());
          for (auto [x, y] : ivs) s.push_back(interval_stats(trace, x, y));
          return s;
        });
    for (std::size_t k = 0; k + 1 < ivs.size(); ++k) {
      std::vector<double> tau2;
      tau2.reserve(reps);
      for (const auto& d : draws) {
        const double t = static_cast<double>(d[k].tau) * g.tau_inflation;
        tau2.push_back(t * t);
      }
      const auto m = mean_se(tau2);
      const double bound = durint_bound(N, ivs[k].first, ivs[k].second);
      detail::add_cell(rep,
                       {{"lemma", "durint"}, {"N", N}, {"x", ivs[k].first}, {"y", ivs[k].second},
                        {"mean_tau2", m.mean}, {"se", m.se}, {"bound", bound}},
                       m.mean + 3.0 * m.se <= bound);
    }
    std::vector<double> e2;
    e2.reserve(reps);
    for (const auto& d : draws) {
      const double e = static_cast<double>(d.back().edges);
      e2.push_back(e * e);
    }
    const auto m = mean_se(e2);
    const double bound = numedges_bound(N);
    detail::add_cell(rep, {{"lemma", "numedges"}, {"N", N}, {"mean_edges2", m.mean}, {"se", m.se}, {"bound", bound}},
                     m.mean + 3.0 * m.se <= bound);
    if (!opts.csv_dir.empty()) {
      for (std::size_t r = 0; r < draws.size(); ++r)
        for (const auto& s : draws[r]) csv << N << ',' << r << ',' << s.x << ',' << s.y << ',' << s.tau << ',' << s.edges << '\n';
    }
  }
  detail::write_csv(opts, "genealogy_bounds", csv.str());
  return rep;
}

/// Stationary type counts K_N for PIM with p = theta/(2N), exact sampler.
inline std::vector<std::size_t> sample_k_exact(std::size_t N, double theta, std::size_t reps, const RunOptions& opts) {
  if (theta == 0.0) return std::vector<std::size_t>(reps, 1);
  const MutationModel model = MutationModel::pim_for_theta(N, theta);
  if (!(model.rate() < 1.0)) throw ValidationError("exact sampler needs theta < 2N");
  const std::uint64_t stream = detail::stream_for("k_exact", {{"N", N}, {"theta", theta}});
  return run_replicates<std::size_t>(reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) {
    return exact_stationary_partition_pim(N, model.rate(), rng).block_count();
  });
}

/// E[K^2] + 3 SE against the second-moment bound; E[K] against ln N is a diagnostic curve.
inline nlohmann::json verify_kn_moment(const std::vector<std::size_t>& N_list, double theta, std::size_t reps,
                                       const RunOptions& opts) {
  detail::require_reps(reps);
  if (theta < 0.0) throw DomainError("theta must be >= 0");
  auto rep = detail::report("kn_moment", {{"N", N_list}, {"theta", theta}, {"reps", reps}}, opts);
  std::vector<double> log_n;
  std::vector<double> mean_k;
  std::ostringstream csv;
  csv << "N,replicate,K\n";
  for (std::size_t N : N_list) {
    const auto ks = sample_k_exact(N, theta, reps, opts);
    const auto m = k_moments(ks);
    const double p_sup = theta / (2.0 * static_cast<double>(N));
    const double bound = kn2_bound(N, p_sup);
    detail::add_cell(rep,
                     {{"N", N}, {"p_sup", p_sup}, {"mean_k", m.mean}, {"se_k", m.se_mean}, {"mean_k32", m.mean_k32},
                      {"se_k32", m.se_k32}, {"mean_k2", m.mean_k2}, {"se_k2", m.se_k2},
                      {"jensen_consistent", m.jensen_consistent}, {"bound", bound}},
                     m.mean_k2 + 3.0 * m.se_k2 <= bound);
    log_n.push_back(std::log(static_cast<double>(N)));
    mean_k.push_back(m.mean);
    if (!opts.csv_dir.empty())
      for (std::size_t r = 0; r < ks.size(); ++r) csv << N << ',' << r << ',' << ks[r] << '\n';
  }
  rep["log_n_slope"] = log_n.size() >= 2 ? nlohmann::json(ols_slope(log_n, mean_k)) : nlohmann::json(nullptr);
  detail::write_csv(opts, "kn_moment", csv.str());
  return rep;
}

/// Exact check, in rational arithmetic, that the match-functional gap
/// theta/(n(theta+1)) is at most the CRP bound with H_2, k = 2, ||phi|| = 1.
inline nlohmann::json verify_proposition_crp(const std::vector<unsigned>& n_list, const std::vector<double>& thetas,
                                             const RunOptions& opts) {
  using Rational = boost::multiprecision::cpp_rational;
  if (n_list.empty() || thetas.empty()) throw ValidationError("verify_proposition_crp needs nonempty grids");
  auto rep = detail::report("proposition_crp", {{"n", n_list}, {"thetas", thetas}}, opts);
  const TestFunctionClass tf = MomentClass{2, 1.0};
  std::size_t failures = 0;
  nlohmann::json worst;
  double worst_ratio = -1.0;
  for (double theta_d : thetas) {
    require_theta(theta_d);
    const Rational theta(theta_d);
    const auto D = d_constants<Rational>(tf, theta);
    for (unsigned n : n_list) {
      const Rational gap = theta / (Rational(n) * (theta + Rational(1)));
      const Rational bound = crp_proposition_bound<Rational>(n, D, theta);
      const bool ok = gap <= bound;
      failures += !ok;
      const double ratio = static_cast<double>(gap / bound);
      if (!ok || ratio > worst_ratio) {
        worst_ratio = ratio;
        worst = {{"n", n}, {"theta", theta_d}, {"gap", static_cast<double>(gap)}, {"bound", static_cast<double>(bound)}};
      }
      if (n_list.size() <= 32 || !ok) {
        detail::add_cell(rep, {{"n", n}, {"theta", theta_d}, {"gap", static_cast<double>(gap)},
                               {"bound", static_cast<double>(bound)}},
                         ok);
      }
    }
  }
  rep["grid_points"] = n_list.size() * thetas.size();
  rep["failures"] = failures;
  rep["worst_gap_to_bound"] = worst;
  if (failures) rep["pass"] = false;
  return rep;
}

/// TV between K_N laws from the forward burn-in and the exact backward sampler.
inline nlohmann::json verify_sampler_agreement(std::size_t N, double theta, std::size_t reps, const RunOptions& opts,
                                               std::size_t burn_in = 0, double max_tv = 0.02) {
  detail::require_reps(reps);
  const std::size_t burn = burn_in ? burn_in : default_burn_in(N);
  auto rep = detail::report("sampler_agreement",
                            {{"N", N}, {"theta", theta}, {"reps", reps}, {"burn_in", burn}, {"max_tv", max_tv}}, opts);
  const MutationModel model = MutationModel::pim_for_theta(N, theta);
  const auto exact = sample_k_exact(N, theta, reps, opts);
  const std::uint64_t stream = detail::stream_for("k_forward", {{"N", N}, {"theta", theta}, {"burn_in", burn}});
  const auto forward = run_replicates<std::pair<std::size_t, bool>>(
      reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) {
        const auto run = wf_stationary_sample(N, model, burn, rng);
        return std::pair{run.population.type_count(), run.diagnostic.warning};
      });
  std::size_t kmax = 0;
  std::size_t warnings = 0;
  for (auto k : exact) kmax = std::max(kmax, k);
  for (auto [k, w] : forward) {
    kmax = std::max(kmax, k);
    warnings += w;
  }
  std::vector<double> pe(kmax + 1, 0.0);
  std::vector<double> pf(kmax + 1, 0.0);
  std::vector<std::size_t> fk;
  fk.reserve(reps);
  for (auto k : exact) pe[k] += 1.0 / static_cast<double>(reps);
  for (auto [k, w] : forward) {
    pf[k] += 1.0 / static_cast<double>(reps);
    fk.push_back(k);
  }
  const double tv = tv_distance(pe, pf);
  const auto me = k_moments(exact);
  const auto mf = k_moments(fk);
  detail::add_cell(rep,
                   {{"tv", tv}, {"exact_mean_k", me.mean}, {"forward_mean_k", mf.mean},
                    {"burn_in_warnings", warnings}},
                   tv <= max_tv);
  if (!opts.csv_dir.empty()) {
    std::ostringstream csv;
    csv << "replicate,K_exact,K_forward\n";
    for (std::size_t r = 0; r < reps; ++r) csv << r << ',' << exact[r] << ',' << fk[r] << '\n';
    detail::write_csv(opts, "sampler_agreement", csv.str());
  }
  return rep;
}

/// Estimated d_TV(S_n(W_N), S_n(Z)) against the corollary bound, and the
/// estimate decreasing in N with disjoint bootstrap intervals.
inline nlohmann::json verify_corollary_tv(const std::vector<std::size_t>& N_list, double theta, std::size_t n,
                                          std::size_t reps, const RunOptions& opts) {
  detail::require_reps(reps);
  auto rep = detail::report("corollary_tv", {{"N", N_list}, {"theta", theta}, {"n", n}, {"reps", reps},
                                             {"bootstrap", 1000}, {"source", "exact"}},
                            opts);
  std::vector<TVEstimate> estimates;
  for (std::size_t N : N_list) {
    const TVEstimate est = estimate_tv_wf_vs_esf(N, theta, n, reps, opts);
    const double p_sup = theta / (2.0 * static_cast<double>(N));
    const auto inputs = WFBoundInputs::pim(N, theta, k32_from_theorem(N, p_sup), K32Provenance::TheoremBound);
    const auto bound = corollary_tv_bound(static_cast<unsigned>(n), inputs);
    detail::add_cell(rep,
                     {{"N", N}, {"tv", est}, {"bound", bound}, {"bound_inputs", inputs},
                      {"min_1_bound", std::min(1.0, bound.value)}},
                     est.estimate <= std::min(1.0, bound.value));
    estimates.push_back(est);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    decreasing = decreasing && estimates[i].ci_high < estimates[i - 1].ci_low;
  }
  rep["decreasing_beyond_ci"] = decreasing;
  if (!decreasing) rep["pass"] = false;
  return rep;
}

/// Binomial moments by exact enumeration against their bounds and the closed-form fourth central moment.
inline nlohmann::json verify_binomial_moments(unsigned n_max, const RunOptions& opts, double tol = 1e-12) {
  auto rep = detail::report("binomial_moments", {{"n_max", n_max}, {"p_step", 0.05}, {"tol", tol}}, opts);
  std::size_t failures = 0;
  double worst_closed_form = 0.0;
  for (unsigned n = 0; n <= n_max; ++n) {
    for (int i = 0; i <= 20; ++i) {
      const double p = i / 20.0;
      // Exact enumeration over the pmf.
      double c4 = 0.0;
      double r3 = 0.0;
      double r2 = 0.0;
      double choose = 1.0;
      for (unsigned k = 0; k <= n; ++k) {
        const double pk = choose * std::pow(p, k) * std::pow(1.0 - p, n - k);
        const double d = k - n * p;
        c4 += pk * d * d * d * d;
        r3 += pk * k * k * k;
        r2 += pk * k * k;
        choose = choose * (n - k) / (k + 1);
      }
      const auto b = binomial_moment_bounds(n, p);
      const double closed = binomial_central4_exact(n, p);
      worst_closed_form = std::max(worst_closed_form, std::abs(closed - c4));
      const bool ok = c4 <= b.central4 + tol && r3 <= b.raw3 * (1 + 1e-12) + tol && r2 <= b.raw2 * (1 + 1e-12) + tol &&
                      std::abs(closed - c4) <= tol;
      failures += !ok;
      if (!ok) detail::add_cell(rep, {{"n", n}, {"p", p}, {"central4", c4}, {"raw3", r3}, {"raw2", r2}}, false);
    }
  }
  rep["grid_points"] = (n_max + 1) * 21;
  rep["failures"] = failures;
  rep["max_closed_form_error"] = worst_closed_form;
  return rep;
}

/// Stationarity of the Fleming-Viot transition at DP(theta) input, through the
/// two-sample match probability, and the mean absorption time of the death process.
inline nlohmann::json verify_fv_stationarity(double theta, const std::vector<double>& times, std::size_t reps,
                                             const RunOptions& opts, double trunc_tol = kTolerances.fv_truncation) {
  detail::require_reps(reps);
  auto rep = detail::report("fv_stationarity",
                            {{"theta", theta}, {"times", times}, {"reps", reps}, {"trunc_tol", trunc_tol},
                             {"residual_tol", kTolerances.gem_residual}},
                            opts);
  const double target = match_probability_dp(theta);
  for (double t : times) {
    const std::uint64_t stream = detail::stream_for("fv_stationarity", {{"theta", theta}, {"t", t}});
    const auto draws = run_replicates<double>(reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) {
      LabelSource labels;
      const AtomicMeasure mu = dp_sample(theta, kTolerances.gem_residual, rng, labels);
      return sample_transition(mu, theta, t, trunc_tol, rng, labels).measure.match_probability();
    });
    const auto m = mean_se(draws);
    detail::add_cell(rep, {{"check", "match_probability"}, {"t", t}, {"mean", m.mean}, {"se", m.se}, {"exact", target}},
                     std::abs(m.mean - target) <= 5.0 * m.se);
  }
  // T from a high entry level; the expected remaining tail time is added back.
  const std::size_t entry = death_entry_level(theta, 1.0, trunc_tol);
  const double tail = death_tail_time(entry, theta);
  const std::uint64_t stream = detail::stream_for("fv_absorption", {{"theta", theta}});
  const auto times_t = run_replicates<double>(reps, opts.seed, stream, opts.threads, [&](Rng& rng, std::size_t) {
    return sample_death_path(theta, entry, rng).absorption_time() + tail;
  });
  const auto m = mean_se(times_t);
  const double bound = 2.0 * (theta + 1.0) / theta;
  detail::add_cell(rep,
                   {{"check", "absorption_time"}, {"entry_level", entry}, {"tail_added", tail}, {"mean", m.mean},
                    {"se", m.se}, {"bound", bound}},
                   m.mean <= bound + 3.0 * m.se);
  return rep;
}

// ---------------------------------------------------------------------------

/// Parameters for `verify all`.
struct VerifyAllConfig {
  std::size_t crp_reps = 1'000'000;
  std::size_t paintbox_reps = 100'000;
  std::size_t transition_reps = 1'000'000;
  std::size_t genealogy_reps = 10'000;
  std::size_t kn_reps = 10'000;
  std::size_t agreement_reps = 10'000;
  std::size_t corollary_reps = 20'000'000;
  std::size_t fv_reps = 100'000;
  unsigned crp_n_max = 10'000;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "esf_normalization", "crp_esf",          "paintbox",     "ancestral_transition", "genealogy_bounds",
      "kn_moment",         "proposition_crp",  "sampler_agreement", "corollary_tv",   "binomial_moments",
      "fv_stationarity"};
  return names;
}

inline nlohmann::json run_experiment(const std::string& name, const RunOptions& opts, const VerifyAllConfig& c = {}) {
  if (name == "esf_normalization") return verify_esf_normalization(8, {0.1, 0.5, 1, 2, 5, 10}, opts);
  if (name == "crp_esf") return verify_crp_esf(5, 1.0, c.crp_reps, opts);
  if (name == "paintbox") return verify_paintbox({0.5, 1.0, 2.0}, c.paintbox_reps, opts);
  if (name == "ancestral_transition") return verify_transition_law({{10, 5}, {50, 20}}, c.transition_reps, opts);
  if (name == "genealogy_bounds") return verify_genealogy_bounds({50, 100, 200}, default_intervals, c.genealogy_reps, opts);
  if (name == "kn_moment") return verify_kn_moment({100, 200, 400, 500, 800}, 1.0, c.kn_reps, opts);
  if (name == "proposition_crp") {
    std::vector<unsigned> ns(c.crp_n_max);
    for (unsigned i = 0; i < c.crp_n_max; ++i) ns[i] = i + 1;
    return verify_proposition_crp(ns, {0.5, 1, 2, 5}, opts);
  }
  if (name == "sampler_agreement") return verify_sampler_agreement(200, 1.0, c.agreement_reps, opts);
  if (name == "corollary_tv") return verify_corollary_tv({50, 200, 800}, 1.0, 3, c.corollary_reps, opts);
  if (name == "binomial_moments") return verify_binomial_moments(12, opts);
  if (name == "fv_stationarity") return verify_fv_stationarity(1.0, {0.1, 1.0, 10.0}, c.fv_reps, opts);
  throw ValidationError("unknown experiment '" + name + "'");
}

inline nlohmann::json verify_all(const RunOptions& opts, const VerifyAllConfig& c = {}) {
  nlohmann::json out{{"schema", "wfpd.verify_report/1"}, {"seed", opts.seed}, {"experiments", nlohmann::json::array()}};
  bool pass = true;
  for (const auto& name : experiment_names()) {
    auto rep = run_experiment(name, opts, c);
    pass = pass && rep["pass"].get<bool>();
    out["experiments"].push_back(std::move(rep));
  }
  out["pass"] = pass;
  return out;
}

}  // namespace wfpd
