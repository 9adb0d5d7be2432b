#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wfpd/wright_fisher.hpp"

using namespace wfpd;

namespace {

PartitionDistribution oracle_law(int N, double p, int n) {
  PartitionDistribution out;
  for (const auto& [rgs, prob] : oracle::WrightFisherSampleLaw(N, p, n).solve()) {
    out[SetPartition::from_rgs(std::vector<std::uint32_t>(rgs.begin(), rgs.end()))] += prob;
  }
  return out;
}

}  // namespace

TEST(Oracle, TwoIndividualMatchProbability) {
  // Two lineages: coalesce w.p. 1/N, each mutates w.p. p.
  const double N = 2.0;
  const double p = 0.3;
  const double q = (1 - p) * (1 - p);
  const double match = q / N / (1.0 - q * (1 - 1 / N));
  const auto law = oracle_law(2, p, 2);
  EXPECT_NEAR(law.at(SetPartition::parse("00")), match, 1e-12);
  EXPECT_NEAR(match, 0.3245, 5e-5);
}

TEST(WfAdvance, PreservesPopulationSize) {
  Rng rng = make_rng(1);
  auto pop = WFPopulation::all_distinct(50, rng);
  const auto model = MutationModel::pim(0.05);
  for (int g = 0; g < 200; ++g) {
    StepDetail d;
    wf_advance(pop, model, rng, &d);
    std::size_t total = 0;
    for (const auto& t : pop.types()) total += t.count;
    EXPECT_EQ(total, 50u);
    std::size_t offspring = 0;
    for (auto [l, m] : d.offspring) offspring += m;
    EXPECT_EQ(offspring, 50u);
    for (auto [l, b] : d.mutations) EXPECT_LE(b, d.offspring[l]);
  }
  EXPECT_EQ(pop.generation(), 200u);
}

TEST(WfAdvance, ZeroRateNeverCreatesTypes) {
  Rng rng = make_rng(2);
  auto pop = WFPopulation::monomorphic(30, 7);
  for (int g = 0; g < 100; ++g) wf_advance(pop, MutationModel::pim(0.0), rng);
  EXPECT_EQ(pop.type_count(), 1u);
  EXPECT_EQ(pop.count_of(7), 30u);
}

TEST(WfAdvance, UnitRateMakesEveryChildFresh) {
  Rng rng = make_rng(3);
  auto pop = WFPopulation::monomorphic(30, 0);
  wf_advance(pop, MutationModel::pim(1.0), rng);
  EXPECT_EQ(pop.type_count(), 30u);
  EXPECT_EQ(pop.count_of(0), 0u);
}

TEST(WfAdvance, TableKernelMergesRecurrentTypes) {
  Rng rng = make_rng(4);
  const auto model = MutationModel::custom([](Label, double) { return 1.0; }, 1.0, 0.0, 0.0, 0.0,
                                           {{100, 0.1, 1.0}, {101, 0.9, 1.0}});
  auto pop = WFPopulation::monomorphic(40, 0);
  wf_advance(pop, model, rng);
  EXPECT_LE(pop.type_count(), 2u);
  EXPECT_EQ(pop.count_of(100) + pop.count_of(101), 40u);
  EXPECT_GE(pop.next_label(), 102u);
}

TEST(MutationModel, Validation) {
  EXPECT_THROW(MutationModel::pim(1.5), DomainError);
  EXPECT_THROW(MutationModel::pim_for_theta(10, 21.0), DomainError);
  EXPECT_NEAR(MutationModel::pim_for_theta(100, 1.0).rate(), 0.005, 1e-18);
  EXPECT_EQ(MutationModel::pim_for_theta(100, 1.0).p_dev_sup(100, 1.0), 0.0);
  EXPECT_THROW(MutationModel::custom([](Label, double) { return 0.1; }, 0.1, 0, 0, 0.5), ValidationError);
}

TEST(Population, RejectsBadCounts) {
  EXPECT_THROW(WFPopulation(3, {{0, 2, 0.5}}, 1), ValidationError);
  EXPECT_THROW(WFPopulation(3, {{0, 2, 0.5}, {0, 1, 0.5}}, 1), ValidationError);
  const WFPopulation pop(4, {{0, 3, 0.2}, {1, 1, 0.4}}, 2);
  EXPECT_DOUBLE_EQ(pop.empirical_measure().match_probability(), 0.625);
}

TEST(ExactSampler, MatchesRecursionOracle) {
  for (auto [N, p, n] : {std::tuple{5, 0.1, 3}, {8, 0.03, 3}, {3, 0.2, 3}}) {
    const auto exact = oracle_law(N, p, n);
    Rng rng = make_rng(20 + N);
    PartitionDistribution emp;
    const int reps = 200000;
    for (int r = 0; r < reps; ++r) emp[exact_stationary_partition_pim(N, p, rng, n)] += 1.0 / reps;
    EXPECT_LT(variation_distance(emp, exact, 1e-6), 0.01) << N << " " << p;
  }
}

TEST(ExactSampler, FullPopulationMatchesOracle) {
  const auto exact = oracle_law(4, 0.15, 4);
  Rng rng = make_rng(31);
  PartitionDistribution emp;
  const int reps = 200000;
  for (int r = 0; r < reps; ++r) emp[exact_stationary_partition_pim(4, 0.15, rng)] += 1.0 / reps;
  EXPECT_LT(variation_distance(emp, exact, 1e-6), 0.01);
}

TEST(ForwardSampler, MatchesRecursionOracle) {
  const auto exact = oracle_law(6, 0.1, 3);
  Rng rng = make_rng(40);
  PartitionDistribution emp;
  const int reps = 50000;
  for (int r = 0; r < reps; ++r) {
    const auto run = wf_stationary_sample(6, MutationModel::pim(0.1), 120, rng);
    emp[sample_partition(run.population, 3, rng)] += 1.0 / reps;
  }
  EXPECT_LT(variation_distance(emp, exact, 1e-6), 0.015);
}

TEST(Genealogy, TypeCountBoundedByMutationsAboveTwoAncestors) {
  Rng rng = make_rng(5);
  for (int r = 0; r < 300; ++r) {
    const auto g = trace_pim_genealogy(60, 0.01, rng);
    EXPECT_LE(g.partition.block_count(), 2 + g.mutations_above_two);
    EXPECT_EQ(g.ancestor_counts.front(), 60u);
    EXPECT_EQ(g.partition.size(), 60u);
  }
}

TEST(SamplePartition, Basics) {
  Rng rng = make_rng(6);
  const WFPopulation pop(5, {{0, 2, 0.1}, {9, 3, 0.7}}, 10);
  for (int r = 0; r < 50; ++r) EXPECT_LE(sample_partition(pop, 5, rng).block_count(), 2u);
  EXPECT_THROW(sample_partition(pop, 6, rng), ValidationError);
  EXPECT_NO_THROW(sample_partition(pop, 6, rng, true));
}

TEST(KMoments, PlugInValues) {
  const std::vector<std::size_t> ks{1, 4, 4, 9};
  const auto m = k_moments(ks);
  EXPECT_DOUBLE_EQ(m.mean, 4.5);
  EXPECT_DOUBLE_EQ(m.mean_k32, (1 + 8 + 8 + 27) / 4.0);
  EXPECT_DOUBLE_EQ(m.mean_k2, (1 + 16 + 16 + 81) / 4.0);
  EXPECT_TRUE(m.jensen_consistent);
  // For a plain mean the jackknife SE equals the usual s/sqrt(n).
  const double s2 = ((1 - 4.5) * (1 - 4.5) + 2 * 0.25 + 4.5 * 4.5) / 3.0;
  EXPECT_NEAR(m.se_mean, std::sqrt(s2 / 4.0), 1e-12);
}

TEST(Diagnostics, FlagsTrendingTrace) {
  std::vector<std::size_t> trend(1000);
  for (std::size_t i = 0; i < trend.size(); ++i) trend[i] = i;
  EXPECT_TRUE(diagnose_trace(trend).warning);
  Rng rng = make_rng(8);
  std::vector<std::size_t> flat(1000);
  for (auto& v : flat) v = 5 + uniform_index(rng, 3);
  EXPECT_FALSE(diagnose_trace(flat).warning);
}
