#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "partobs/game.hpp"

namespace partobs {

/// Set partition of {0..n-1} stored as a restricted-growth string: agent 0
/// is in block 0 and every agent's block id is at most one more than the
/// largest id used before it. Two values compare equal iff they describe the
/// same set partition; ordering is lexicographic on the assignment.
class Partition {
 public:
  Partition() = default;

  /// Relabels arbitrary block labels into canonical form.
  static Partition FromLabels(const std::vector<int>& labels);
  /// Blocks of 0-indexed agents; must cover {0..n-1} disjointly with no
  /// empty block.
  static Partition FromBlocks(const std::vector<std::vector<int>>& blocks,
                              int n);
  static Partition Singletons(int n);
  static Partition SingleBlock(int n);

  int n() const { return static_cast<int>(assignment_.size()); }
  const std::vector<int>& assignment() const { return assignment_; }
  int block_count() const { return block_count_; }
  int block_of(int agent) const { return assignment_[agent]; }
  /// Blocks ordered by their smallest member, members ascending.
  std::vector<std::vector<int>> blocks() const;
  std::vector<int> block_sizes() const;
  int min_block_size() const;

  friend bool operator==(const Partition&, const Partition&) = default;
  friend auto operator<=>(const Partition& a, const Partition& b) {
    return a.assignment_ <=> b.assignment_;
  }

 private:
  std::vector<int> assignment_;
  int block_count_ = 0;
};

/// Symmetric n x n observation matrix, either the exact block-averaging
/// matrix of a partition or a point of the relaxed feasible set.
struct ObservationMatrix {
  enum class Provenance { kExact, kRelaxed };

  Eigen::MatrixXd H;
  Provenance provenance = Provenance::kRelaxed;
};

/// (H_p)_ij = 1 / l_i when i and j share a block, 0 otherwise.
ObservationMatrix h_matrix(const Partition& p);

/// Visits every partition of {0..n-1} whose blocks all have at least
/// min_block_size members, in lexicographic order of the canonical
/// assignment. Prefixes that cannot be completed are pruned. Returning false
/// from the visitor stops the enumeration.
void for_each_partition(int n, int min_block_size,
                        const std::function<bool(const Partition&)>& visit);

/// Same stream restricted to positions [first, last) so independent workers
/// can consume disjoint slices. Returns the number of partitions visited.
std::uint64_t for_each_partition_in_range(
    int n, int min_block_size, std::uint64_t first, std::uint64_t last,
    const std::function<bool(const Partition&)>& visit);

std::uint64_t count_partitions(int n, int min_block_size);

/// Parse error carrying the byte offset of the problem in the input text.
class PartitionParseError : public ValidationError {
 public:
  PartitionParseError(const std::string& what, std::size_t offset)
      : ValidationError(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Parses "{1,5,8},{2,9},{3,6,7,10},{4}" (1-indexed agents). When n is
/// zero the agent count is inferred from the largest index.
Partition parse_partition(std::string_view text, int n = 0);
std::string format_partition(const Partition& p);

/// {"blocks": [[1,5,8],[2,9],...]} with 1-indexed agents.
std::string partition_to_json(const Partition& p);
Partition partition_from_json(const std::string& text, int n = 0);

}  // namespace partobs
