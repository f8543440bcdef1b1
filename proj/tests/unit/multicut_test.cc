#include "grounded/multicut.h"

#include <gtest/gtest.h>

#include "grounded/rng.h"
#include "oracles.h"

namespace grounded {
namespace {

std::vector<WeightedEdge> RandomGraph(Rng& rng, int n, double density) {
  std::vector<WeightedEdge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.Bernoulli(density)) edges.push_back({i, j, rng.Uniform(-1.0, 1.0)});
    }
  }
  return edges;
}

TEST(SetPartitionOracleTest, CountsBellNumbers) {
  const int bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140};
  for (int n = 0; n <= 8; ++n) {
    int count = 0;
    testing::ForEachSetPartition(n, [&](const std::vector<int>&) { ++count; });
    EXPECT_EQ(count, bell[n]) << "n=" << n;
  }
}

TEST(MulticutTest, AllPositiveCostsGiveOneCluster) {
  std::vector<WeightedEdge> edges = {{0, 1, 0.5}, {1, 2, 0.1}, {2, 3, 2.0},
                                     {0, 3, 0.3}};
  const Partition p = SolveMulticut(4, edges);
  EXPECT_EQ(p.num_clusters(), 1);
  EXPECT_DOUBLE_EQ(p.objective, 2.9);
}

TEST(MulticutTest, AllNegativeCostsGiveSingletons) {
  std::vector<WeightedEdge> edges = {{0, 1, -0.5}, {1, 2, -0.1}, {0, 2, -2.0}};
  const Partition p = SolveMulticut(3, edges);
  EXPECT_EQ(p.num_clusters(), 3);
  EXPECT_DOUBLE_EQ(p.objective, 0.0);
}

TEST(MulticutTest, EmptyGraph) {
  const Partition p = SolveMulticut(0, {});
  EXPECT_TRUE(p.labels.empty());
  EXPECT_EQ(p.num_clusters(), 0);
}

TEST(MulticutTest, MatchesExhaustiveEnumerationOnSmallGraphs) {
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng.Index(8));
    const auto edges = RandomGraph(rng, n, 0.3 + 0.7 * rng.Uniform());
    const Partition p = SolveMulticut(n, edges);
    const auto brute = testing::BruteForceMulticut(n, edges);
    if (std::abs(p.objective - brute.best) > 1e-9) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(MulticutTest, RefinementNeverBelowGreedyOrSingletons) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.Index(30));
    const auto edges = RandomGraph(rng, n, 0.4);
    Partition greedy = GreedyAdditiveContraction(n, edges);
    Partition refined = greedy;
    RefinePartition(n, edges, refined);
    EXPECT_GE(greedy.objective, -1e-12);
    EXPECT_GE(refined.objective, greedy.objective - 1e-12);
    EXPECT_NEAR(refined.objective, PartitionObjective(refined.labels, edges),
                1e-9);
  }
}

TEST(MulticutTest, GreedyTieBreakIsDeterministic) {
  // Equal-cost edges (0,1) and (1,2) conflict through a strongly negative
  // (0,2); the lowest index pair (0,1) is contracted first.
  std::vector<WeightedEdge> edges = {{1, 2, 1.0}, {0, 1, 1.0}, {0, 2, -5.0}};
  const Partition p = GreedyAdditiveContraction(3, edges);
  EXPECT_EQ(p.labels, (std::vector<int>{0, 0, 1}));
}

TEST(MulticutTest, OptimumIsInvariantToNodeOrder) {
  Rng rng(5);
  int checked = 0;
  while (checked < 50) {
    const int n = 3 + static_cast<int>(rng.Index(6));
    const auto edges = RandomGraph(rng, n, 0.8);
    const auto brute = testing::BruteForceMulticut(n, edges, 1e-9);
    if (brute.optimal_count != 1) continue;
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    rng.Shuffle(std::span(perm));
    std::vector<WeightedEdge> permuted;
    for (const WeightedEdge& e : edges) {
      permuted.push_back({perm[e.u], perm[e.v], e.cost});
    }
    const Partition a = SolveMulticut(n, edges);
    const Partition b = SolveMulticut(n, permuted);
    std::vector<int> b_in_original(n);
    for (int i = 0; i < n; ++i) b_in_original[i] = b.labels[perm[i]];
    EXPECT_EQ(a.labels, CanonicalLabels(b_in_original));
    EXPECT_EQ(a.labels, CanonicalLabels(brute.labels));
    ++checked;
  }
}

}  // namespace
}  // namespace grounded
