#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "wfpd/esf_crp.hpp"
#include "wfpd/stats.hpp"

using namespace wfpd;

TEST(Esf, SpecExamplesAtThetaOne) {
  EXPECT_NEAR(esf_set_partition_prob(SetPartition::parse("012"), 1.0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(esf_set_partition_prob(SetPartition::parse("000"), 1.0), 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(esf_set_partition_prob(SetPartition::parse("001"), 1.0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(esf_set_partition_prob(SetPartition::parse("01"), 2.0), 2.0 / 3.0, 1e-15);
}

TEST(Esf, NormalizesOverAllPartitions) {
  for (double theta : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    for (std::size_t n = 1; n <= 8; ++n) {
      CompensatedSum s;
      for (const auto& [p, prob] : esf_distribution(n, theta)) s += prob;
      EXPECT_NEAR(s.value(), 1.0, 1e-10) << "n=" << n << " theta=" << theta;
    }
  }
}

TEST(Esf, RejectsBadTheta) {
  EXPECT_THROW(esf_set_partition_prob(SetPartition::parse("01"), 0.0), DomainError);
  EXPECT_THROW(esf_distribution(3, -1.0), DomainError);
  EXPECT_THROW(esf_distribution(13, 1.0), ResourceError);
}

// Summing the restaurant path probability over every arrival order must give
// n! times the set-partition probability, for any order-invariant law.
TEST(Esf, MatchesSequentialPathOracle) {
  for (double theta : {0.3, 1.0, 4.0}) {
    for (const auto& p : enumerate_partitions(5)) {
      std::vector<int> block_of(p.assignment().begin(), p.assignment().end());
      std::vector<int> order(5);
      std::iota(order.begin(), order.end(), 0);
      const double first = oracle::crp_path_probability(order, block_of, theta);
      do {
        EXPECT_NEAR(oracle::crp_path_probability(order, block_of, theta), first, 1e-14);
      } while (std::next_permutation(order.begin(), order.end()));
      EXPECT_NEAR(esf_set_partition_prob(p, theta), first, 1e-13);
    }
  }
}

TEST(Esf, ExchangeableUnderRelabeling) {
  const auto p = SetPartition::parse("00101");
  const auto q = SetPartition::parse("01110");
  EXPECT_NEAR(esf_set_partition_prob(p, 1.7), esf_set_partition_prob(q, 1.7), 1e-15);
}

TEST(Crp, EmpiricalLawMatchesEsf) {
  const std::size_t reps = 200000;
  Rng rng = make_rng(5);
  std::map<SetPartition, double> counts;
  for (std::size_t r = 0; r < reps; ++r) counts[crp_sample(4, 1.5, rng)] += 1.0 / reps;
  EXPECT_LT(variation_distance(counts, esf_distribution(4, 1.5), 1e-6), 0.01);
}

TEST(Crp, SeatingIsSizeBiased) {
  CRPState crp(2.0);
  Rng rng = make_rng(3);
  for (int i = 0; i < 50; ++i) crp.seat(rng);
  EXPECT_EQ(std::accumulate(crp.table_sizes().begin(), crp.table_sizes().end(), std::size_t{0}), 50u);
  EXPECT_EQ(crp.table_labels().size(), crp.table_sizes().size());
  EXPECT_THROW(crp_sample(0, 1.0, rng), ValidationError);
}

TEST(Crp, EmpiricalMeasureHasMassesOverN) {
  Rng rng = make_rng(9);
  LabelSource labels;
  const auto w = crp_empirical_measure(7, 1.0, rng, labels);
  for (const auto& a : w.atoms()) EXPECT_NEAR(a.mass * 7.0, std::round(a.mass * 7.0), 1e-12);
}

TEST(StickBreaking, ResidualBelowToleranceAndSorted) {
  Rng rng = make_rng(1);
  for (double theta : {0.5, 1.0, 5.0}) {
    const auto mv = gem_stick_breaking(theta, 1e-10, rng);
    EXPECT_LT(mv.residual, 1e-10);
    EXPECT_NO_THROW(mv.validate());
  }
  EXPECT_THROW(gem_sticks(1000.0, 1e-10, rng, 100), NumericalError);
}

TEST(StickBreaking, FirstStickMeanIsOneOverOnePlusTheta) {
  Rng rng = make_rng(2);
  std::vector<double> v;
  for (int i = 0; i < 100000; ++i) v.push_back(beta_one(rng, 3.0));
  const auto m = mean_se(v);
  EXPECT_NEAR(m.mean, 0.25, 5 * m.se);
}

TEST(Paintbox, DistinctSumsOnSmallVectors) {
  const std::vector<double> m{0.5, 0.3, 0.2};
  EXPECT_NEAR(pair_sum_distinct(m), 2 * (0.15 + 0.1 + 0.06), 1e-15);
  EXPECT_NEAR(triple_sum_distinct(m), 6 * 0.03, 1e-15);
}

TEST(Paintbox, MomentsEqualAllSingletonEsfProbabilities) {
  for (double theta : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(paintbox_pair_moment(theta), esf_set_partition_prob(SetPartition::parse("01"), theta), 1e-15);
    EXPECT_NEAR(paintbox_triple_moment(theta), esf_set_partition_prob(SetPartition::parse("012"), theta), 1e-15);
  }
}

TEST(MatchProbability, GapIsExact) {
  for (double theta : {0.5, 1.0, 2.0, 5.0})
    for (std::size_t n : {1u, 2u, 10u, 1000u})
      EXPECT_NEAR(match_probability_empirical(n, theta) - match_probability_dp(theta), theta / (n * (theta + 1.0)),
                  1e-14);
  EXPECT_NEAR(match_probability_empirical(10, 1.0) - match_probability_dp(1.0), 0.05, 1e-15);
}
