#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "partobs/partition.hpp"

namespace partobs {

/// Undirected weighted graph read off the off-diagonal entries of a relaxed
/// observation matrix; entries at or below the threshold are dropped.
class WeightedGraph {
 public:
  explicit WeightedGraph(Eigen::MatrixXd adjacency);
  static WeightedGraph FromObservation(const Eigen::MatrixXd& H,
                                       double threshold = 1e-6);

  int n() const { return static_cast<int>(adjacency_.rows()); }
  double weight(int i, int j) const { return adjacency_(i, j); }
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }
  std::vector<int> neighbors(int i) const;

 private:
  Eigen::MatrixXd adjacency_;
};

using Cluster = std::vector<int>;

/// k_in / (k_in + k_out)^alpha, where k_in counts every internal edge from
/// both ends and k_out sums the boundary edges. A cluster with no incident
/// edges has fitness 0.
double cluster_fitness(const WeightedGraph& graph, const Cluster& cluster,
                       double alpha = 1.0);

/// Natural-community cover grown from the lowest uncovered node until every
/// node is covered. Clusters may overlap; each is sorted ascending.
std::vector<Cluster> detect_communities(const WeightedGraph& graph,
                                        double alpha = 1.0);

struct RoundingOptions {
  double threshold = 1e-6;
  double alpha = 1.0;
  /// How a node claimed by several clusters is settled.
  enum class Overlap {
    kConnectionWeight,  // cluster holding the most edge weight to the node
    kFitnessGain,       // cluster whose fitness drops most without the node
  };
  Overlap overlap = Overlap::kConnectionWeight;
};

struct RoundingResult {
  Partition partition;
  std::vector<Cluster> cover;
};

/// Community detection on the graph of H, overlap resolution, then repeated
/// merging of the smallest undersized block into the block it is most
/// strongly connected to (by H weight) until every block has >= L members.
RoundingResult round_to_partition(const Eigen::MatrixXd& H, int min_block_size,
                                  const RoundingOptions& options = {});

/// Graphviz export: edge penwidth scaled so the heaviest edge is 5.0, node
/// fill colour by block of `p`. Labels are 1-indexed.
void write_dot(std::ostream& out, const WeightedGraph& graph,
               const Partition& p);

}  // namespace partobs
