#include "grounded/multicut.h"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <tuple>
#include <unordered_map>

namespace grounded {
namespace {

constexpr double kMinGain = 1e-12;

using Adjacency = std::vector<std::vector<std::pair<int, double>>>;

// Parallel edges are summed, self loops dropped.
Adjacency BuildAdjacency(int n, std::span<const WeightedEdge> edges) {
  std::vector<std::map<int, double>> acc(n);
  for (const WeightedEdge& e : edges) {
    if (e.u == e.v) continue;
    acc[e.u][e.v] += e.cost;
    acc[e.v][e.u] += e.cost;
  }
  Adjacency adj(n);
  for (int i = 0; i < n; ++i) adj[i].assign(acc[i].begin(), acc[i].end());
  return adj;
}

// Best improving sequence of moves between the node sets `a` and `b`
// (b may be empty). Returns the gain applied, 0 if none.
double KernighanLinPair(const Adjacency& adj, std::vector<int>& labels,
                        const std::vector<int>& a, const std::vector<int>& b,
                        int label_a, int label_b) {
  std::vector<int> nodes(a);
  nodes.insert(nodes.end(), b.begin(), b.end());
  std::unordered_map<int, int> side;  // node -> 0 (a) or 1 (b)
  for (int v : a) side[v] = 0;
  for (int v : b) side[v] = 1;

  std::unordered_map<int, double> gain;
  double between = 0.0;
  for (int v : nodes) {
    double g = 0.0;
    for (const auto& [u, c] : adj[v]) {
      auto it = side.find(u);
      if (it == side.end()) continue;
      if (it->second == side[v]) {
        g -= c;
      } else {
        g += c;
        if (side[v] == 0) between += c;
      }
    }
    gain[v] = g;
  }

  std::set<int> moved;
  std::vector<int> sequence;
  double cumulative = 0.0, best = 0.0;
  std::size_t best_len = 0;
  for (std::size_t step = 0; step < nodes.size(); ++step) {
    int pick = -1;
    double pick_gain = 0.0;
    for (int v : nodes) {
      if (moved.contains(v)) continue;
      if (pick < 0 || gain[v] > pick_gain ||
          (gain[v] == pick_gain && v < pick)) {
        pick = v;
        pick_gain = gain[v];
      }
    }
    cumulative += pick_gain;
    const int old_side = side[pick];
    side[pick] = 1 - old_side;
    moved.insert(pick);
    sequence.push_back(pick);
    for (const auto& [u, c] : adj[pick]) {
      auto it = side.find(u);
      if (it == side.end() || moved.contains(u)) continue;
      gain[u] += (it->second == old_side) ? 2.0 * c : -2.0 * c;
    }
    if (cumulative > best + kMinGain) {
      best = cumulative;
      best_len = sequence.size();
    }
  }

  if (!b.empty() && between > best + kMinGain) {
    for (int v : b) labels[v] = label_a;
    return between;
  }
  if (best_len == 0) return 0.0;
  for (std::size_t k = 0; k < best_len; ++k) {
    const int v = sequence[k];
    labels[v] = (labels[v] == label_a) ? label_b : label_a;
  }
  return best;
}

// One multi-way sweep: every node moves at most once, each time to the
// cluster (neighbouring or new) with the best gain; the best prefix of the
// sequence is kept. Returns the gain applied.
double MultiwaySweep(const Adjacency& adj, std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  if (n < 2) return 0.0;
  std::vector<int> work = labels;
  int next_label = *std::max_element(work.begin(), work.end()) + 1;
  std::vector<bool> moved(n, false);
  std::vector<std::pair<int, int>> sequence;  // (node, previous label)
  double cumulative = 0.0, best = 0.0;
  std::size_t best_len = 0;
  for (int step = 0; step < n; ++step) {
    int pick = -1, target = -1;
    double pick_gain = 0.0;
    for (int v = 0; v < n; ++v) {
      if (moved[v]) continue;
      std::map<int, double> to_cluster;
      double own = 0.0;
      for (const auto& [u, c] : adj[v]) {
        if (work[u] == work[v]) own += c;
        else to_cluster[work[u]] += c;
      }
      // A fresh singleton cluster has weight 0.
      to_cluster.emplace(next_label, 0.0);
      for (const auto& [t, w] : to_cluster) {
        const double g = w - own;
        if (pick < 0 || g > pick_gain + kMinGain) {
          pick = v;
          target = t;
          pick_gain = g;
        }
      }
    }
    sequence.emplace_back(pick, work[pick]);
    work[pick] = target;
    if (target == next_label) ++next_label;
    moved[pick] = true;
    cumulative += pick_gain;
    if (cumulative > best + kMinGain) {
      best = cumulative;
      best_len = sequence.size();
    }
  }
  if (best_len == 0) return 0.0;
  for (std::size_t k = sequence.size(); k > best_len; --k) {
    work[sequence[k - 1].first] = sequence[k - 1].second;
  }
  labels = work;
  return best;
}

}  // namespace

int Partition::num_clusters() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

double PartitionObjective(std::span<const int> labels,
                          std::span<const WeightedEdge> edges) {
  double total = 0.0;
  for (const WeightedEdge& e : edges) {
    if (e.u != e.v && labels[e.u] == labels[e.v]) total += e.cost;
  }
  return total;
}

std::vector<int> CanonicalLabels(std::span<const int> labels) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] =
        remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

Partition GreedyAdditiveContraction(int num_nodes,
                                    std::span<const WeightedEdge> edges) {
  // Cluster representative is the smallest node id in the cluster.
  std::vector<std::map<int, double>> adj(num_nodes);
  for (const WeightedEdge& e : edges) {
    if (e.u == e.v) continue;
    adj[e.u][e.v] += e.cost;
    adj[e.v][e.u] += e.cost;
  }
  std::vector<int> parent(num_nodes);
  for (int i = 0; i < num_nodes; ++i) parent[i] = i;
  std::vector<bool> alive(num_nodes, true);

  // Max-heap on cost, then min on (a, b).
  using Entry = std::tuple<double, int, int>;
  auto worse = [](const Entry& x, const Entry& y) {
    if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
    if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) > std::get<1>(y);
    return std::get<2>(x) > std::get<2>(y);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (int a = 0; a < num_nodes; ++a) {
    for (const auto& [b, c] : adj[a]) {
      if (a < b && c > 0.0) heap.emplace(c, a, b);
    }
  }
  while (!heap.empty()) {
    const auto [cost, a, b] = heap.top();
    heap.pop();
    if (!alive[a] || !alive[b]) continue;
    auto it = adj[a].find(b);
    if (it == adj[a].end() || it->second != cost) continue;
    // Merge b into a (a < b keeps a as the representative).
    alive[b] = false;
    parent[b] = a;
    adj[a].erase(b);
    for (const auto& [k, c] : adj[b]) {
      if (k == a) continue;
      adj[k].erase(b);
      const double merged = (adj[a][k] += c);
      adj[k][a] = merged;
      if (merged > 0.0) heap.emplace(merged, std::min(a, k), std::max(a, k));
    }
    adj[b].clear();
  }
  std::vector<int> labels(num_nodes);
  for (int i = 0; i < num_nodes; ++i) {
    int r = i;
    while (parent[r] != r) r = parent[r];
    labels[i] = r;
  }
  Partition p;
  p.labels = CanonicalLabels(labels);
  p.objective = PartitionObjective(p.labels, edges);
  return p;
}

void RefinePartition(int num_nodes, std::span<const WeightedEdge> edges,
                     Partition& partition, int max_passes) {
  const Adjacency adj = BuildAdjacency(num_nodes, edges);
  std::vector<int> labels = partition.labels;
  const long budget = static_cast<long>(max_passes) * std::max(1, num_nodes);
  for (long round = 0; round < budget; ++round) {
    labels = CanonicalLabels(labels);
    const int k =
        num_nodes == 0 ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<int>> members(k);
    for (int v = 0; v < num_nodes; ++v) members[labels[v]].push_back(v);
    std::set<std::pair<int, int>> neighbours;
    for (int v = 0; v < num_nodes; ++v) {
      for (const auto& [u, c] : adj[v]) {
        if (labels[u] != labels[v]) {
          neighbours.emplace(std::min(labels[u], labels[v]),
                             std::max(labels[u], labels[v]));
        }
      }
    }
    // Best improvement over every pair move, every split and one multi-way
    // sweep; ties keep the earliest candidate.
    double best_gain = 0.0;
    std::vector<int> best_labels;
    auto consider = [&](std::vector<int>& trial, double gain) {
      if (gain > best_gain + kMinGain) {
        best_gain = gain;
        best_labels = trial;
      }
    };
    for (const auto& [la, lb] : neighbours) {
      std::vector<int> trial = labels;
      consider(trial,
               KernighanLinPair(adj, trial, members[la], members[lb], la, lb));
    }
    for (int la = 0; la < k; ++la) {
      if (members[la].size() < 2) continue;
      std::vector<int> trial = labels;
      consider(trial, KernighanLinPair(adj, trial, members[la], {}, la, k));
    }
    {
      std::vector<int> trial = labels;
      consider(trial, MultiwaySweep(adj, trial));
    }
    if (best_labels.empty()) break;
    labels = std::move(best_labels);
  }
  partition.labels = CanonicalLabels(labels);
  partition.objective = PartitionObjective(partition.labels, edges);
}

namespace {

bool Better(const Partition& a, const Partition& b) {
  return a.objective > b.objective + kMinGain;
}

// Iterated local search: kick the current optimum by joining two
// neighbouring clusters or by forcing one node into another cluster (or a
// new one), re-refine, and keep the first strict improvement. Repeats until
// no kick helps.
void Perturb(int num_nodes, std::span<const WeightedEdge> edges,
             Partition& best, int max_passes, bool node_kicks,
             bool pair_kicks) {
  bool improved = true;
  int rounds = 0;
  while (improved && rounds++ < max_passes) {
    improved = false;
    std::vector<Partition> kicks;
    std::set<std::pair<int, int>> neighbours;
    for (const WeightedEdge& e : edges) {
      const int a = best.labels[e.u], b = best.labels[e.v];
      if (a != b) neighbours.emplace(std::min(a, b), std::max(a, b));
    }
    for (const auto& [a, b] : neighbours) {
      Partition trial = best;
      for (int& l : trial.labels) {
        if (l == b) l = a;
      }
      kicks.push_back(std::move(trial));
    }
    if (node_kicks) {
      for (int v = 0; v < num_nodes; ++v) {
        std::set<int> targets = {num_nodes};
        for (const WeightedEdge& e : edges) {
          if (e.u == v) targets.insert(best.labels[e.v]);
          if (e.v == v) targets.insert(best.labels[e.u]);
        }
        targets.erase(best.labels[v]);
        for (int t : targets) {
          Partition trial = best;
          trial.labels[v] = t;
          kicks.push_back(std::move(trial));
        }
      }
    }
    if (pair_kicks) {
      // Two-node moves: swap, co-move into a fresh cluster, co-move into a
      // cluster adjacent to either node.
      for (int u = 0; u < num_nodes; ++u) {
        for (int v = u + 1; v < num_nodes; ++v) {
          const int lu = best.labels[u], lv = best.labels[v];
          if (lu != lv) {
            Partition trial = best;
            std::swap(trial.labels[u], trial.labels[v]);
            kicks.push_back(std::move(trial));
          }
          std::set<int> targets = {num_nodes};
          for (const WeightedEdge& e : edges) {
            for (int w : {u, v}) {
              if (e.u == w) targets.insert(best.labels[e.v]);
              if (e.v == w) targets.insert(best.labels[e.u]);
            }
          }
          for (int t : targets) {
            if (t == lu && t == lv) continue;
            Partition trial = best;
            trial.labels[u] = t;
            trial.labels[v] = t;
            kicks.push_back(std::move(trial));
          }
        }
      }
    }
    for (Partition& trial : kicks) {
      RefinePartition(num_nodes, edges, trial, max_passes);
      if (Better(trial, best)) {
        best = std::move(trial);
        improved = true;
        break;
      }
    }
  }
}

Partition SolveComponent(int num_nodes, std::span<const WeightedEdge> edges,
                         const MulticutOptions& options) {
  Partition best = GreedyAdditiveContraction(num_nodes, edges);
  if (!options.refine) return best;
  RefinePartition(num_nodes, edges, best, options.max_passes);
  // Second start from all singletons.
  Partition singles;
  singles.labels.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) singles.labels[i] = i;
  RefinePartition(num_nodes, edges, singles, options.max_passes);
  if (Better(singles, best)) best = std::move(singles);
  Perturb(num_nodes, edges, best, options.max_passes,
          num_nodes <= options.node_kick_limit,
          num_nodes <= options.pair_kick_limit);
  return best;
}

}  // namespace

Partition SolveMulticut(int num_nodes, std::span<const WeightedEdge> edges,
                        const MulticutOptions& options) {
  // Some optimum never joins nodes that are disconnected through
  // positive-cost edges, so each positive component is solved alone.
  std::vector<int> parent(num_nodes);
  for (int i = 0; i < num_nodes; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const WeightedEdge& e : edges) {
    if (e.cost > 0.0) parent[find(e.u)] = find(e.v);
  }
  std::map<int, std::vector<int>> components;
  for (int v = 0; v < num_nodes; ++v) components[find(v)].push_back(v);

  std::vector<int> local(num_nodes, -1);
  std::vector<std::vector<WeightedEdge>> sub_edges(num_nodes);
  for (const auto& [root, nodes] : components) {
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      local[nodes[i]] = i;
    }
  }
  for (const WeightedEdge& e : edges) {
    if (find(e.u) == find(e.v)) {
      sub_edges[find(e.u)].push_back({local[e.u], local[e.v], e.cost});
    }
  }
  std::vector<int> labels(num_nodes, 0);
  int next_label = 0;
  for (const auto& [root, nodes] : components) {
    const Partition part = SolveComponent(
        static_cast<int>(nodes.size()), sub_edges[root], options);
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      labels[nodes[i]] = next_label + part.labels[i];
    }
    next_label += part.num_clusters();
  }
  Partition result;
  result.labels = CanonicalLabels(labels);
  result.objective = PartitionObjective(result.labels, edges);
  return result;
}

}  // namespace grounded
