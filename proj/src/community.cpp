#include "partobs/community.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace partobs {

using Eigen::MatrixXd;

WeightedGraph::WeightedGraph(MatrixXd adjacency)
    : adjacency_(std::move(adjacency)) {
  if (adjacency_.rows() != adjacency_.cols()) {
    throw ValidationError("adjacency matrix must be square");
  }
  adjacency_.diagonal().setZero();
  if ((adjacency_.array() < 0.0).any()) {
    throw ValidationError("edge weights must be nonnegative");
  }
  if ((adjacency_ - adjacency_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ValidationError("adjacency matrix must be symmetric");
  }
}

WeightedGraph WeightedGraph::FromObservation(const MatrixXd& H,
                                             double threshold) {
  const MatrixXd sym = 0.5 * (H + H.transpose());
  MatrixXd adj = (sym.array() > threshold).select(sym, 0.0);
  return WeightedGraph(std::move(adj));
}

std::vector<int> WeightedGraph::neighbors(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n(); ++j) {
    if (adjacency_(i, j) > 0.0) out.push_back(j);
  }
  return out;
}

namespace {

double fitness_of(double k_in, double k_total, double alpha) {
  if (k_total <= 0.0) return 0.0;
  return k_in / std::pow(k_total, alpha);
}

// Running k_in / k_total of one growing cluster plus each node's weight into
// it, so every candidate gain costs O(1).
class LocalCommunity {
 public:
  LocalCommunity(const WeightedGraph& graph, double alpha)
      : g_(graph), alpha_(alpha), member_(graph.n(), false),
        inner_(graph.n(), 0.0), degree_(graph.n(), 0.0) {
    for (int v = 0; v < g_.n(); ++v) degree_[v] = g_.adjacency().row(v).sum();
  }

  void Add(int v) { Toggle(v, true); }
  void Remove(int v) { Toggle(v, false); }
  bool Contains(int v) const { return member_[v]; }

  double Fitness() const { return fitness_of(k_in_, k_total_, alpha_); }
  double GainIfAdded(int v) const {
    return fitness_of(k_in_ + 2.0 * inner_[v], k_total_ + degree_[v], alpha_) -
           Fitness();
  }
  double GainIfPresent(int v) const {
    return Fitness() - fitness_of(k_in_ - 2.0 * inner_[v],
                                  k_total_ - degree_[v], alpha_);
  }
  double Inner(int v) const { return inner_[v]; }

  Cluster Members() const {
    Cluster c;
    for (int v = 0; v < g_.n(); ++v) {
      if (member_[v]) c.push_back(v);
    }
    return c;
  }

 private:
  void Toggle(int v, bool in) {
    const double sign = in ? 1.0 : -1.0;
    k_in_ += sign * 2.0 * inner_[v];
    k_total_ += sign * degree_[v];
    member_[v] = in;
    for (int u = 0; u < g_.n(); ++u) inner_[u] += sign * g_.weight(u, v);
  }

  const WeightedGraph& g_;
  double alpha_;
  std::vector<bool> member_;
  std::vector<double> inner_;
  std::vector<double> degree_;
  double k_in_ = 0.0;
  double k_total_ = 0.0;
};

Cluster grow_natural_community(const WeightedGraph& graph, int seed,
                               double alpha) {
  const int n = graph.n();
  LocalCommunity community(graph, alpha);
  community.Add(seed);
  // Add/remove cycles are impossible in exact arithmetic; the cap only
  // guards against rounding ping-pong.
  for (long steps = 0; steps < 4L * n * n + 16; ++steps) {
    int best = -1;
    double best_gain = 0.0;
    for (int v = 0; v < n; ++v) {
      if (community.Contains(v) || community.Inner(v) <= 0.0) continue;
      const double gain = community.GainIfAdded(v);
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    if (best < 0) break;
    community.Add(best);

    while (true) {
      int worst = -1;
      double worst_gain = 0.0;
      for (int v = 0; v < n; ++v) {
        if (v == seed || !community.Contains(v)) continue;
        const double gain = community.GainIfPresent(v);
        if (gain < worst_gain) {
          worst_gain = gain;
          worst = v;
        }
      }
      if (worst < 0) break;
      community.Remove(worst);
    }
  }
  return community.Members();
}

double connection_weight(const MatrixXd& weights, const Cluster& block,
                         int v) {
  double total = 0.0;
  for (int u : block) {
    if (u != v) total += weights(v, u);
  }
  return total;
}

}  // namespace

double cluster_fitness(const WeightedGraph& graph, const Cluster& cluster,
                       double alpha) {
  if (cluster.empty()) throw ValidationError("cluster must be nonempty");
  std::vector<bool> inside(graph.n(), false);
  for (int v : cluster) inside[v] = true;
  double k_in = 0.0;
  double k_out = 0.0;
  for (int v : cluster) {
    for (int u = 0; u < graph.n(); ++u) {
      if (u == v) continue;
      (inside[u] ? k_in : k_out) += graph.weight(v, u);
    }
  }
  return fitness_of(k_in, k_in + k_out, alpha);
}

std::vector<Cluster> detect_communities(const WeightedGraph& graph,
                                        double alpha) {
  std::vector<Cluster> cover;
  std::vector<bool> covered(graph.n(), false);
  for (int seed = 0; seed < graph.n(); ++seed) {
    if (covered[seed]) continue;
    Cluster c = grow_natural_community(graph, seed, alpha);
    for (int v : c) covered[v] = true;
    cover.push_back(std::move(c));
  }
  return cover;
}

RoundingResult round_to_partition(const MatrixXd& H, int min_block_size,
                                  const RoundingOptions& options) {
  const int n = static_cast<int>(H.rows());
  if (min_block_size < 1 || min_block_size > n) {
    throw ValidationError("cannot form blocks of size >= " +
                          std::to_string(min_block_size) + " from " +
                          std::to_string(n) + " agents");
  }
  const WeightedGraph graph = WeightedGraph::FromObservation(H, options.threshold);
  RoundingResult result;
  result.cover = detect_communities(graph, options.alpha);

  std::vector<int> label(n, -1);
  for (int v = 0; v < n; ++v) {
    double best_score = 0.0;
    for (int k = 0; k < static_cast<int>(result.cover.size()); ++k) {
      const Cluster& c = result.cover[k];
      if (!std::binary_search(c.begin(), c.end(), v)) continue;
      double score = 0.0;
      if (options.overlap == RoundingOptions::Overlap::kConnectionWeight) {
        score = connection_weight(graph.adjacency(), c, v);
      } else {
        Cluster without;
        for (int u : c) {
          if (u != v) without.push_back(u);
        }
        score = cluster_fitness(graph, c, options.alpha) -
                (without.empty() ? 0.0
                                 : cluster_fitness(graph, without, options.alpha));
      }
      if (label[v] == -1 || score > best_score) {
        label[v] = k;
        best_score = score;
      }
    }
  }

  // Repair: merge undersized blocks by total H connection weight.
  const MatrixXd weights = (0.5 * (H + H.transpose())).cwiseMax(0.0);
  auto blocks = Partition::FromLabels(label).blocks();
  while (true) {
    int smallest = -1;
    for (int k = 0; k < static_cast<int>(blocks.size()); ++k) {
      if (static_cast<int>(blocks[k].size()) >= min_block_size) continue;
      if (smallest < 0 || blocks[k].size() < blocks[smallest].size()) {
        smallest = k;
      }
    }
    if (smallest < 0) break;
    int target = -1;
    double best = -1.0;
    for (int k = 0; k < static_cast<int>(blocks.size()); ++k) {
      if (k == smallest) continue;
      double total = 0.0;
      for (int i : blocks[smallest]) {
        for (int j : blocks[k]) total += weights(i, j);
      }
      if (total > best) {
        best = total;
        target = k;
      }
    }
    blocks[target].insert(blocks[target].end(), blocks[smallest].begin(),
                          blocks[smallest].end());
    blocks.erase(blocks.begin() + smallest);
  }
  result.partition = Partition::FromBlocks(blocks, n);
  return result;
}

void write_dot(std::ostream& out, const WeightedGraph& graph,
               const Partition& p) {
  static constexpr std::array<const char*, 12> kPalette = {
      "#f4a261", "#8ecae6", "#90be6d", "#e76f51", "#cdb4db", "#ffd166",
      "#06d6a0", "#ef476f", "#a8dadc", "#bc6c25", "#b5e48c", "#adb5bd"};
  const int n = graph.n();
  const double max_weight = graph.adjacency().maxCoeff();
  out << "graph H {\n";
  out << "  node [shape=circle, style=filled];\n";
  for (int v = 0; v < n; ++v) {
    out << "  " << (v + 1) << " [fillcolor=\""
        << kPalette[p.block_of(v) % kPalette.size()] << "\", block="
        << (p.block_of(v) + 1) << "];\n";
  }
  char buf[64];
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double w = graph.weight(i, j);
      if (w <= 0.0) continue;
      std::snprintf(buf, sizeof buf, "penwidth=%.4f, weight=%.6g",
                    5.0 * w / max_weight, w);
      out << "  " << (i + 1) << " -- " << (j + 1) << " [" << buf << "];\n";
    }
  }
  out << "}\n";
}

}  // namespace partobs
