#include <gtest/gtest.h>

#include "wfpd/experiments.hpp"

using namespace wfpd;

namespace {

RunOptions seeded(std::uint64_t seed, unsigned threads) {
  RunOptions o;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

TEST(Manifest, GitBlobHashMatchesKnownValue) {
  // `printf 'hello\n' | git hash-object --stdin`
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Manifest, HashDependsOnParametersAndSeed) {
  const auto a = ExperimentManifest::make("x", {{"N", 10}}, 1);
  const auto b = ExperimentManifest::make("x", {{"N", 10}}, 2);
  const auto c = ExperimentManifest::make("x", {{"N", 11}}, 1);
  EXPECT_EQ(a.hash, ExperimentManifest::make("x", {{"N", 10}}, 1).hash);
  EXPECT_NE(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
}

TEST(TVEstimate, ExactSamplerSmallGap) {
  const auto est = estimate_tv_wf_vs_esf(200, 1.0, 3, 100000, seeded(3, 1));
  EXPECT_LE(est.estimate, 0.03);
  EXPECT_LE(est.ci_low, est.estimate);
  EXPECT_GE(est.ci_high, est.estimate);
  EXPECT_EQ(est.frequencies.size(), 5u);
  EXPECT_NEAR(est.bias_bound, std::sqrt(5.0 / 4e5), 1e-15);
}

TEST(TVEstimate, IndependentOfThreadCount) {
  const auto a = estimate_tv_wf_vs_esf(50, 1.0, 3, 5000, seeded(9, 1));
  const auto b = estimate_tv_wf_vs_esf(50, 1.0, 3, 5000, seeded(9, 4));
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(TVEstimate, PreconditionErrors) {
  EXPECT_THROW(estimate_tv_wf_vs_esf(200, 1.0, 9, 1000, {}), ResourceError);
  EXPECT_THROW(estimate_tv_wf_vs_esf(200, 1.0, 3, 999, {}), ValidationError);
  EXPECT_THROW(estimate_tv_wf_vs_esf(10, 25.0, 3, 1000, {}), DomainError);
}

TEST(TVEstimate, ForwardSourceRuns) {
  TVOptions tv;
  tv.source = StationarySource::Forward;
  tv.burn_in = 200;
  const auto est = estimate_tv_wf_vs_esf(20, 1.0, 3, 2000, seeded(1, 1), tv);
  EXPECT_GE(est.estimate, 0.0);
  EXPECT_LE(est.estimate, 1.0);
}

TEST(PropositionCrp, Examples) {
  const auto rep = verify_proposition_crp({1, 10}, {1.0}, {});
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_DOUBLE_EQ(rep["cells"][1]["gap"].get<double>(), 0.05);
  EXPECT_NEAR(rep["cells"][1]["bound"].get<double>(), 1.2 + 4.0 / 3.0, 1e-14);
  EXPECT_DOUBLE_EQ(rep["cells"][0]["gap"].get<double>(), 0.5);
  EXPECT_THROW(verify_proposition_crp({}, {1.0}, {}), ValidationError);
}

TEST(GenealogyBounds, PassesAndFailureInjectionFlips) {
  auto intervals = [](std::size_t N) {
    return N == 100 ? std::vector<std::pair<std::size_t, std::size_t>>{{5, 20}}
                    : std::vector<std::pair<std::size_t, std::size_t>>{{2, 50}};
  };
  const auto ok = verify_genealogy_bounds({50, 100}, intervals, 1000, seeded(2, 1));
  EXPECT_TRUE(ok["pass"].get<bool>());
  GenealogyOptions inflate;
  inflate.tau_inflation = 1e3;
  const auto bad = verify_genealogy_bounds({50, 100}, intervals, 1000, seeded(2, 1), inflate);
  EXPECT_FALSE(bad["pass"].get<bool>());
}

TEST(KnMoment, ZeroThetaGivesOneType) {
  const auto rep = verify_kn_moment({50, 100}, 0.0, 1000, {});
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_DOUBLE_EQ(rep["cells"][0]["mean_k2"].get<double>(), 1.0);
}

TEST(KnMoment, PassesWithSlack) {
  const auto rep = verify_kn_moment({100, 500}, 1.0, 1000, seeded(4, 1));
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_GT(rep["log_n_slope"].get<double>(), 0.0);
}

TEST(BinomialMoments, AllPass) {
  const auto rep = verify_binomial_moments(12, {});
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_LE(rep["max_closed_form_error"].get<double>(), 1e-12);
}

TEST(Csv, GenealogyWritesReplicateRows) {
  const auto dir = std::filesystem::temp_directory_path() / "wfpd_csv_test";
  std::filesystem::remove_all(dir);
  RunOptions opts = seeded(5, 1);
  opts.csv_dir = dir.string();
  verify_genealogy_bounds({20}, [](std::size_t) { return std::vector<std::pair<std::size_t, std::size_t>>{{2, 20}}; },
                          1000, opts);
  std::ifstream in(dir / "genealogy_bounds.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "N,replicate,x,y,tau,edges");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2000u);
  std::filesystem::remove_all(dir);
}

TEST(Streams, DistinctNamesGiveDistinctStreams) {
  EXPECT_NE(fnv1a("a"), fnv1a("b"));
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
}
