#ifndef GROUNDED_MULTICUT_H_
#define GROUNDED_MULTICUT_H_

#include <span>
#include <vector>

namespace grounded {

// Undirected edge; positive cost rewards joining u and v, negative rewards
// cutting them.
struct WeightedEdge {
  int u = 0;
  int v = 0;
  double cost = 0.0;
};

struct Partition {
  std::vector<int> labels;  // canonical: clusters numbered by first node
  double objective = 0.0;   // sum of intra-cluster edge costs

  int num_clusters() const;
};

struct MulticutOptions {
  bool refine = true;
  int max_passes = 64;
  // Single-node kicks are tried only on graphs up to this size.
  int node_kick_limit = 64;
  // Two-node kicks cost a quadratic number of refinements per round.
  int pair_kick_limit = 16;
};

// Sum of costs over edges whose endpoints share a label.
double PartitionObjective(std::span<const int> labels,
                          std::span<const WeightedEdge> edges);

// Relabels clusters 0, 1, ... in order of their first node.
std::vector<int> CanonicalLabels(std::span<const int> labels);

// Greedy additive edge contraction: repeatedly merges the pair of clusters
// with the largest positive summed cost; ties go to the lowest
// (representative, representative) index pair.
Partition GreedyAdditiveContraction(int num_nodes,
                                    std::span<const WeightedEdge> edges);

// Kernighan-Lin style local search: for every pair of neighbouring clusters
// (and every cluster against a fresh empty one) builds the best sequence of
// single-node moves and applies its best positive prefix, also trying
// outright merges. Never lowers the objective.
void RefinePartition(int num_nodes, std::span<const WeightedEdge> edges,
                     Partition& partition, int max_passes = 64);

// Heuristic maximizer of the intra-cluster cost: contraction and an
// all-singletons start, each refined, then perturbation kicks.
Partition SolveMulticut(int num_nodes, std::span<const WeightedEdge> edges,
                        const MulticutOptions& options = {});

}  // namespace grounded

#endif  // GROUNDED_MULTICUT_H_
