#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfpd/wfpd.hpp"

namespace wfpd::cli {

struct RootConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;  // empty: stdout
};

namespace detail {

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ResourceError("cannot open output file " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : fallback_; }

 private:
  std::ostream& fallback_;
  std::ofstream file_;
};

inline std::vector<std::pair<std::size_t, std::size_t>> parse_intervals(const std::string& spec, std::size_t N) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ValidationError("interval '" + item + "' must look like x:y");
    try {
      std::size_t x = std::stoul(item.substr(0, colon));
      std::size_t y = std::stoul(item.substr(colon + 1));
      out.emplace_back(x, y == 0 ? N : y);
    } catch (const std::logic_error&) {
      throw ValidationError("interval '" + item + "' must hold two integers");
    }
  }
  if (out.empty()) throw ValidationError("no intervals given");
  return out;
}

inline void emit_json(Output& o, const nlohmann::json& j) { o.stream() << j.dump(2) << '\n'; }

}  // namespace detail

/// Runs the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Wright-Fisher / Poisson-Dirichlet toolkit", "wfpd"};
  app.require_subcommand(1);
  RootConfig root;
  app.add_option("--seed", root.seed, "root RNG seed")->envname("WFPD_SEED");
  app.add_option("--threads", root.threads, "worker threads")->envname("WFPD_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--out", root.out, "write output here instead of stdout");

  // esf
  std::size_t esf_n = 0;
  double esf_theta = 1.0;
  auto* esf = app.add_subcommand("esf", "exact ESF law over set partitions");
  esf->add_option("--n", esf_n)->required();
  esf->add_option("--theta", esf_theta)->required();

  // crp-sample
  std::size_t crp_n = 0;
  double crp_theta = 1.0;
  std::size_t crp_reps = 1;
  auto* crp = app.add_subcommand("crp-sample", "stream CRP partitions, one RGS per line");
  crp->add_option("--n", crp_n)->required();
  crp->add_option("--theta", crp_theta)->required();
  crp->add_option("--reps", crp_reps);

  // wf simulate
  auto* wf = app.add_subcommand("wf", "Wright-Fisher simulation");
  wf->require_subcommand(1);
  std::size_t wf_N = 0;
  double wf_theta = 1.0;
  std::size_t wf_burn = 0;
  std::size_t wf_reps = 1;
  std::size_t wf_sample_n = 0;
  std::string wf_source = "forward";
  auto* wf_sim = wf->add_subcommand("simulate", "stationary PIM replicates as JSON lines");
  wf_sim->add_option("--N", wf_N)->required();
  wf_sim->add_option("--theta", wf_theta)->required();
  wf_sim->add_option("--burn-in", wf_burn, "generations (default 20N)");
  wf_sim->add_option("--reps", wf_reps);
  wf_sim->add_option("--sample-n", wf_sample_n, "sample size for the partition (default N)");
  wf_sim->add_option("--source", wf_source)->check(CLI::IsMember({"forward", "exact"}));

  // genealogy
  std::size_t gen_N = 0;
  std::size_t gen_reps = 1;
  std::string gen_intervals = "2:0";
  auto* gen = app.add_subcommand("genealogy", "ancestor-count interval statistics as CSV");
  gen->add_option("--N", gen_N)->required();
  gen->add_option("--reps", gen_reps);
  gen->add_option("--intervals", gen_intervals, "x1:y1,x2:y2 (y = 0 means N)");

  // fv transition
  auto* fv = app.add_subcommand("fv", "Fleming-Viot transition function");
  fv->require_subcommand(1);
  double fv_theta = 1.0;
  double fv_t = 1.0;
  std::size_t fv_reps = 1000;
  double fv_trunc = kTolerances.fv_truncation;
  double fv_residual = kTolerances.gem_residual;
  auto* fv_tr = fv->add_subcommand("transition", "match-statistic summary at time t from a DP(theta) start");
  fv_tr->add_option("--theta", fv_theta)->required();
  fv_tr->add_option("--t", fv_t)->required();
  fv_tr->add_option("--reps", fv_reps);
  fv_tr->add_option("--trunc-tol", fv_trunc)->check(CLI::PositiveNumber);
  fv_tr->add_option("--residual-tol", fv_residual)->check(CLI::PositiveNumber);

  // bounds
  std::string b_preset = "pim";
  std::size_t b_N = 0;
  double b_theta = 1.0;
  unsigned b_n = 2;
  std::string b_k32_mode = "theorem";
  std::optional<double> b_k32;
  std::size_t b_mc_reps = 10000;
  std::string b_class = "h2";
  unsigned b_k = 2;
  double b_phi = 1.0;
  double b_h1 = 1.0;
  double b_h2 = 1.0;
  double b_h21 = 1.0;
  std::string b_a3 = "theorem";
  auto* bounds = app.add_subcommand("bounds", "closed-form error bounds as JSON");
  bounds->add_option("--preset", b_preset)->check(CLI::IsMember({"pim"}));
  bounds->add_option("--N", b_N)->required();
  bounds->add_option("--theta", b_theta)->required();
  bounds->add_option("--n", b_n);
  bounds->add_option("--k32-mode", b_k32_mode)->check(CLI::IsMember({"mc", "theorem", "value"}));
  bounds->add_option("--k32", b_k32, "E[K^{3/2}] for --k32-mode value");
  bounds->add_option("--mc-reps", b_mc_reps);
  bounds->add_option("--test-class", b_class)->check(CLI::IsMember({"h1", "h2"}));
  bounds->add_option("--k", b_k, "moment order for h2");
  bounds->add_option("--phi", b_phi, "sup norm of phi (h2) or sum of sup norms (h1)");
  bounds->add_option("--h1", b_h1);
  bounds->add_option("--h2", b_h2);
  bounds->add_option("--h21", b_h21);
  bounds->add_option("--a3", b_a3)->check(CLI::IsMember({"theorem", "lemma"}));

  // verify
  std::string v_name = "all";
  std::string v_csv;
  auto* verify = app.add_subcommand("verify", "run verification experiments");
  verify->add_option("experiment", v_name, "all or one experiment id")->required();
  verify->add_option("--csv-dir", v_csv, "write per-experiment replicate CSV files here");
  for (auto* sub : {verify, bounds, fv_tr, gen, wf_sim, crp, esf}) {
    sub->add_option("--seed", root.seed)->envname("WFPD_SEED");
    sub->add_option("--threads", root.threads)->envname("WFPD_THREADS")->check(CLI::PositiveNumber);
    sub->add_option("--out", root.out);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 1;
  }

  try {
    RunOptions opts;
    opts.seed = root.seed;
    opts.threads = root.threads;

    if (*esf) {
      detail::Output o(root.out, out);
      detail::emit_json(o, esf_distribution(esf_n, esf_theta));
    } else if (*crp) {
      if (crp_reps < 1) throw ValidationError("--reps must be positive");
      const auto parts = run_replicates<SetPartition>(crp_reps, opts.seed, fnv1a("cli:crp-sample"), opts.threads,
                                                      [&](Rng& rng, std::size_t) { return crp_sample(crp_n, crp_theta, rng); });
      detail::Output o(root.out, out);
      for (const auto& p : parts) o.stream() << p.to_string() << '\n';
    } else if (*wf_sim) {
      const auto model = MutationModel::pim_for_theta(wf_N, wf_theta);
      const std::size_t n = wf_sample_n ? wf_sample_n : wf_N;
      if (n > wf_N) throw ValidationError("--sample-n must not exceed N");
      const std::size_t burn = wf_burn ? wf_burn : default_burn_in(wf_N);
      const bool exact = wf_source == "exact";
      if (exact && !(model.rate() < 1.0)) throw ValidationError("exact source needs theta < 2N");
      const auto records = run_replicates<nlohmann::json>(
          wf_reps, opts.seed, fnv1a("cli:wf-simulate:" + wf_source), opts.threads, [&](Rng& rng, std::size_t i) {
            nlohmann::json rec{{"replicate", i}};
            if (exact) {
              const auto p = exact_stationary_partition_pim(wf_N, model.rate(), rng, n);
              rec["partition"] = p.to_string();
              if (n == wf_N) rec["K"] = p.block_count();
              return rec;
            }
            const auto run = wf_stationary_sample(wf_N, model, burn, rng);
            const auto& tr = run.k_trace;
            double mean = 0.0;
            for (auto k : tr) mean += static_cast<double>(k);
            mean /= static_cast<double>(tr.size());
            rec["K"] = run.population.type_count();
            rec["partition"] = sample_partition(run.population, n, rng).to_string();
            rec["k_trace"] = {{"generations", tr.size()},
                              {"mean", mean},
                              {"min", *std::min_element(tr.begin(), tr.end())},
                              {"max", *std::max_element(tr.begin(), tr.end())},
                              {"last", tr.back()},
                              {"middle_window_mean", run.diagnostic.middle_mean},
                              {"last_window_mean", run.diagnostic.last_mean},
                              {"burn_in_warning", run.diagnostic.warning}};
            return rec;
          });
      detail::Output o(root.out, out);
      std::size_t warnings = 0;
      for (const auto& r : records) {
        o.stream() << r.dump() << '\n';
        if (r.contains("k_trace") && r["k_trace"]["burn_in_warning"].get<bool>()) ++warnings;
      }
      if (warnings) err << "warning: " << warnings << " replicate(s) show a trend in K over the burn-in window\n";
    } else if (*gen) {
      if (gen_N < 3) throw ValidationError("--N must be at least 3");
      const auto ivs = detail::parse_intervals(gen_intervals, gen_N);
      for (auto [x, y] : ivs)
        if (!(x >= 2 && x < y && y <= gen_N)) throw ValidationError("intervals need 2 <= x < y <= N");
      const auto rows = run_replicates<std::vector<IntervalStats>>(
          gen_reps, opts.seed, fnv1a("cli:genealogy"), opts.threads, [&](Rng& rng, std::size_t) {
            const auto trace = simulate_trace(gen_N, gen_N, 2, rng);
            std::vector<IntervalStats> s;
            for (auto [x, y] : ivs) s.push_back(interval_stats(trace, x, y));
            return s;
          });
      detail::Output o(root.out, out);
      o.stream() << "replicate,x,y,tau,edges\n";
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (const auto& s : rows[r]) o.stream() << r << ',' << s.x << ',' << s.y << ',' << s.tau << ',' << s.edges << '\n';
    } else if (*fv_tr) {
      if (fv_reps < 2) throw ValidationError("--reps must be at least 2");
      struct Rec {
        double match = 0.0;
        std::size_t level = 0;
      };
      const auto recs = run_replicates<Rec>(fv_reps, opts.seed, fnv1a("cli:fv-transition"), opts.threads,
                                            [&](Rng& rng, std::size_t) {
                                              LabelSource labels;
                                              const auto mu = dp_sample(fv_theta, fv_residual, rng, labels);
                                              const auto s = sample_transition(mu, fv_theta, fv_t, fv_trunc, rng,
                                                                               labels, fv_residual);
                                              return Rec{s.measure.match_probability(), s.level};
                                            });
      std::vector<double> match;
      std::vector<double> level;
      for (const auto& r : recs) {
        match.push_back(r.match);
        level.push_back(static_cast<double>(r.level));
      }
      const auto mm = mean_se(match);
      const auto ml = mean_se(level);
      detail::Output o(root.out, out);
      detail::emit_json(o, {{"schema", "wfpd.fv_transition/1"},
                            {"theta", fv_theta},
                            {"t", fv_t},
                            {"reps", fv_reps},
                            {"entry_level", death_entry_level(fv_theta, fv_t, fv_trunc)},
                            {"match_probability", {{"mean", mm.mean}, {"se", mm.se}}},
                            {"stationary_match_probability", match_probability_dp(fv_theta)},
                            {"level", {{"mean", ml.mean}, {"se", ml.se}}}});
    } else if (*bounds) {
      if (b_N < 3) throw ValidationError("--N must be at least 3");
      const double p_sup = b_theta / (2.0 * static_cast<double>(b_N));
      double k32 = 0.0;
      K32Provenance prov = K32Provenance::TheoremBound;
      nlohmann::json k32_info;
      if (b_k32_mode == "theorem") {
        k32 = k32_from_theorem(b_N, p_sup);
      } else if (b_k32_mode == "value") {
        if (!b_k32) throw ValidationError("--k32-mode value needs --k32");
        k32 = *b_k32;
        prov = K32Provenance::UserValue;
      } else {
        const auto ks = sample_k_exact(b_N, b_theta, b_mc_reps, opts);
        const auto m = k_moments(ks);
        k32 = m.mean_k32;
        prov = K32Provenance::MonteCarlo;
        k32_info = {{"reps", b_mc_reps}, {"se", m.se_k32}, {"jensen_consistent", m.jensen_consistent}};
      }
      const auto inputs = WFBoundInputs::pim(b_N, b_theta, k32, prov);
      const A3Constant c = b_a3 == "lemma" ? A3Constant::Lemma : A3Constant::Theorem;
      TestFunctionClass tf = MomentClass{b_k, b_phi};
      if (b_class == "h1") tf = SmoothClass{b_h1, b_h2, b_h21, b_phi};
      nlohmann::json j = thm_wf_bound(tf, inputs, c);
      j["preset"] = b_preset;
      j["corollary"] = corollary_tv_bound(b_n, inputs, c);
      j["corollary"]["n"] = b_n;
      if (!k32_info.is_null()) j["k32_mc"] = k32_info;
      detail::Output o(root.out, out);
      detail::emit_json(o, j);
    } else if (*verify) {
      opts.csv_dir = v_csv;
      nlohmann::json rep;
      if (v_name == "all") {
        rep = verify_all(opts);
      } else {
        rep = {{"schema", "wfpd.verify_report/1"}, {"seed", opts.seed}, {"experiments", {run_experiment(v_name, opts)}}};
        rep["pass"] = rep["experiments"][0]["pass"];
      }
      detail::Output o(root.out, out);
      detail::emit_json(o, rep);
      if (!rep["pass"].get<bool>()) err << "verify: at least one check failed\n";
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace wfpd::cli
