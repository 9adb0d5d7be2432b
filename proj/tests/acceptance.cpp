// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "oracles.hpp"
#include "wfpd/wfpd.hpp"

using namespace wfpd;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < limit_seconds;
  const bool pass = o.ok && in_time;
  failures += !pass;
  std::printf("%s criterion %d: %s | %s | %.1fs (limit %.0fs)%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), secs, limit_seconds, in_time ? "" : " TIME LIMIT EXCEEDED");
  std::fflush(stdout);
}

RunOptions options() {
  RunOptions o;
  o.seed = 20240601;
  o.threads = default_threads();
  return o;
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

bool all_cells(const nlohmann::json& rep, const std::function<bool(const nlohmann::json&)>& select) {
  bool ok = true;
  for (const auto& c : rep["cells"])
    if (select(c)) ok = ok && c["pass"].get<bool>();
  return ok;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  const auto suite_start = Clock::now();
  const RunOptions opts = options();

  criterion(1, "ESF sums to one over all set partitions, n <= 8", 10, [] {
    double worst = 0.0;
    for (double theta : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
      for (int n = 1; n <= 8; ++n) {
        CompensatedSum s;
        for (const auto& blocks : oracle::brute_partitions(n)) {
          std::vector<std::vector<std::size_t>> b;
          for (const auto& blk : blocks) {
            b.emplace_back();
            for (int e : blk) b.back().push_back(static_cast<std::size_t>(e + 1));
          }
          s += esf_set_partition_prob(canonicalize_partition(b), theta);
        }
        worst = std::max(worst, std::abs(s.value() - 1.0));
      }
    }
    return Outcome{worst <= 1e-10, fmt("max |sum-1| = %.3g", worst)};
  });

  criterion(2, "CRP vs ESF, n=5 theta=1, 1e6 draws, TV <= 0.01", 60, [&] {
    const auto rep = verify_crp_esf(5, 1.0, 1'000'000, opts, 0.01);
    return Outcome{rep["pass"].get<bool>(), fmt("TV = %.5f", rep["cells"][0]["tv"].get<double>())};
  });

  criterion(3, "paintbox pair/triple moments, 1e5 stick-breaking draws", 60, [&] {
    const auto rep = verify_paintbox({0.5, 1.0, 2.0}, 100'000, opts);
    std::string d;
    for (const auto& c : rep["cells"]) {
      d += fmt("theta=%.1f: pair z=%.2f", c["theta"].get<double>(),
               (c["pair"]["mean"].get<double>() - c["pair"]["exact"].get<double>()) / c["pair"]["se"].get<double>());
      d += fmt(" triple z=%.2f; ",
               (c["triple"]["mean"].get<double>() - c["triple"]["exact"].get<double>()) / c["triple"]["se"].get<double>());
    }
    return Outcome{rep["pass"].get<bool>(), d};
  });

  criterion(4, "balls-in-bins vs transition law, (10,5) and (50,20), TV <= 0.01", 60, [&] {
    const auto rep = verify_transition_law({{10, 5}, {50, 20}}, 1'000'000, opts, 0.01);
    return Outcome{rep["pass"].get<bool>(),
                   fmt("TV = %.5f, %.5f", rep["cells"][0]["tv"].get<double>(), rep["cells"][1]["tv"].get<double>())};
  });

  criterion(5, "E[tau^2] + 3SE <= durint bound, N in {50,100,200} x 3 intervals, 1e4 traces", 120, [&] {
    const auto rep = verify_genealogy_bounds({50, 100, 200}, default_intervals, 10'000, opts);
    double worst = 0.0;
    for (const auto& c : rep["cells"])
      if (c["lemma"] == "durint")
        worst = std::max(worst, (c["mean_tau2"].get<double>() + 3 * c["se"].get<double>()) / c["bound"].get<double>());
    return Outcome{all_cells(rep, [](const auto& c) { return c["lemma"] == "durint"; }),
                   fmt("max (mean+3SE)/bound = %.3g over 9 cells", worst)};
  });

  criterion(6, "E[E^2] + 3SE <= numedges bound, N in {50,100}", 60, [&] {
    const auto rep = verify_genealogy_bounds({50, 100}, default_intervals, 10'000, opts);
    double worst = 0.0;
    for (const auto& c : rep["cells"])
      if (c["lemma"] == "numedges")
        worst = std::max(worst, (c["mean_edges2"].get<double>() + 3 * c["se"].get<double>()) / c["bound"].get<double>());
    return Outcome{all_cells(rep, [](const auto& c) { return c["lemma"] == "numedges"; }),
                   fmt("max (mean+3SE)/bound = %.3g", worst)};
  });

  criterion(7, "E[K^2] + 3SE <= K second-moment bound at N in {200,500}; E[K] slope in ln N > 0", 300, [&] {
    const auto rep = verify_kn_moment({200, 500}, 1.0, 10'000, opts);
    const auto curve = verify_kn_moment({100, 200, 400, 800}, 1.0, 10'000, opts);
    const double slope = curve["log_n_slope"].get<double>();
    std::string d = fmt("E[K^2] = %.2f, %.2f", rep["cells"][0]["mean_k2"].get<double>(),
                        rep["cells"][1]["mean_k2"].get<double>());
    d += fmt("; slope = %.4f", slope);
    return Outcome{rep["pass"].get<bool>() && slope > 0.0, d};
  });

  criterion(8, "CRP gap <= D2 theta/n + D3 2(n+theta-1)/(3n^2), exact rationals, n <= 1e4", 1, [] {
    using Rational = boost::multiprecision::cpp_rational;
    const TestFunctionClass tf = MomentClass{2, 1.0};
    std::size_t bad = 0;
    std::size_t checked = 0;
    for (const Rational& theta : {Rational(1, 2), Rational(1), Rational(2), Rational(5)}) {
      const auto D = d_constants<Rational>(tf, theta);
      for (unsigned n = 1; n <= 10'000; ++n) {
        const Rational gap = theta / (Rational(n) * (theta + 1));
        bad += !(gap <= crp_proposition_bound<Rational>(n, D, theta));
        ++checked;
      }
    }
    return Outcome{bad == 0, std::to_string(checked) + " grid points, " + std::to_string(bad) + " violations"};
  });

  criterion(9, "forward vs exact K law, N=200 theta=1, 1e4 replicates each, TV <= 0.02", 300, [&] {
    const auto rep = verify_sampler_agreement(200, 1.0, 10'000, opts, 0, 0.02);
    const auto& c = rep["cells"][0];
    return Outcome{rep["pass"].get<bool>(), fmt("TV = %.4f; mean K exact %.3f", c["tv"].get<double>(),
                                                c["exact_mean_k"].get<double>()) +
                                                fmt(" forward %.3f", c["forward_mean_k"].get<double>())};
  });

  criterion(10, "TV(S_3(W_N), ESF) <= min(1, corollary bound), decreasing N=200 -> 800 beyond CI", 300, [&] {
    const auto rep = verify_corollary_tv({200, 800}, 1.0, 3, 20'000'000, opts);
    std::string d;
    for (const auto& c : rep["cells"]) {
      d += "N=" + std::to_string(c["N"].get<std::size_t>()) +
           fmt(": %.5f ", c["tv"]["estimate"].get<double>()) +
           fmt("[%.5f, %.5f] ", c["tv"]["ci95"][0].get<double>(), c["tv"]["ci95"][1].get<double>()) +
           fmt("bound %.3g; ", c["bound"]["value"].get<double>());
    }
    return Outcome{rep["pass"].get<bool>(), d};
  });

  criterion(11, "binomial moments <= bounds, n <= 12, p on 0.05 grid; closed-form fourth moment within 1e-12", 10, [] {
    double worst = 0.0;
    bool ok = true;
    for (unsigned n = 0; n <= 12; ++n) {
      for (int i = 0; i <= 20; ++i) {
        const double p = i * 0.05;
        const auto m = oracle::binomial_moments_by_pmf(static_cast<int>(n), p);
        const auto b = binomial_moment_bounds(n, p);
        const double q = p * (1 - p);
        const double closed = n * q * (3.0 * (static_cast<double>(n) - 2.0) * q + 1.0);
        worst = std::max(worst, std::abs(m.central4 - closed));
        ok = ok && m.central4 <= b.central4 + 1e-12 && m.raw3 <= b.raw3 + 1e-9 && m.raw2 <= b.raw2 + 1e-10 &&
             std::abs(binomial_central4_exact(n, p) - closed) <= 1e-12;
      }
    }
    return Outcome{ok && worst <= 1e-12, fmt("max closed-form error %.3g", worst)};
  });

  criterion(12, "FV transition keeps DP(1): match prob within 5SE at t in {0.1,1,10}; E[T] <= 4 + 3SE", 120, [&] {
    const auto rep = verify_fv_stationarity(1.0, {0.1, 1.0, 10.0}, 100'000, opts);
    std::string d;
    for (const auto& c : rep["cells"]) {
      if (c["check"] == "match_probability") {
        d += fmt("t=%.1f z=%.2f; ", c["t"].get<double>(),
                 (c["mean"].get<double>() - c["exact"].get<double>()) / c["se"].get<double>());
      } else {
        d += fmt("E[T]=%.4f (SE %.4f)", c["mean"].get<double>(), c["se"].get<double>());
      }
    }
    return Outcome{rep["pass"].get<bool>(), d};
  });

  const double before_13 = std::chrono::duration<double>(Clock::now() - suite_start).count();
  criterion(13, "`verify all --seed 7` twice gives byte-identical reports", 900 - before_13, [] {
    const auto dir = std::filesystem::temp_directory_path() / "wfpd_acceptance";
    std::filesystem::create_directories(dir);
    const auto a = dir / "run_a.json";
    const auto b = dir / "run_b.json";
    for (const auto& path : {a, b}) {
      std::filesystem::remove(path);
      const std::string cmd = std::string("\"") + WFPD_CLI_PATH + "\" verify all --seed 7 --out \"" + path.string() + "\"";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) return Outcome{false, "cli exit status " + std::to_string(rc)};
    }
    const std::string ra = read_file(a);
    const std::string rb = read_file(b);
    const bool same = !ra.empty() && ra == rb;
    const auto report = nlohmann::json::parse(ra);
    return Outcome{same, std::to_string(ra.size()) + " bytes, identical=" + (same ? "yes" : "no") +
                             ", report pass=" + (report["pass"].get<bool>() ? "true" : "false")};
  });

  const double total = std::chrono::duration<double>(Clock::now() - suite_start).count();
  std::printf("acceptance total %.1fs, %d failing criteria\n", total, failures);
  return failures == 0 ? 0 : 1;
}
