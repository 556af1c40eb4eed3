#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partobs/dynamics.hpp"
#include "partobs/game.hpp"
#include "partobs/partition.hpp"

namespace partobs {

/// Performance objective evaluated at the equilibrium.
struct MetricSpec {
  enum class Kind { kWelfare, kTotalFreeRiding, kSubsetFreeRiding };

  Kind kind = Kind::kTotalFreeRiding;
  /// 0-indexed agents; only used by kSubsetFreeRiding.
  std::vector<int> subset;

  static MetricSpec Welfare() { return {Kind::kWelfare, {}}; }
  static MetricSpec TotalFreeRiding() { return {Kind::kTotalFreeRiding, {}}; }
  static MetricSpec SubsetFreeRiding(std::vector<int> agents);

  bool maximize() const { return kind == Kind::kWelfare; }
  /// Throws ValidationError for an empty or out-of-range subset.
  void validate(int n) const;
  /// Agents summed by free-riding metrics (all agents unless a subset).
  std::vector<int> agents(int n) const;
  std::string name() const;
};

/// "welfare", "freeriding", or "subset:1,4,7" (1-indexed).
MetricSpec parse_metric(const std::string& text, int n);

/// sum_i S_i(W_i x) - c_i x_i
double welfare(const GameInstance& instance, const Eigen::VectorXd& x);

enum class FreeRidingVariant {
  kEta,    // (b_i - x_i) / b_i
  kGamma,  // (W_i x - x_i) / b_i
};

struct FreeRidingReport {
  Eigen::VectorXd per_agent;
  double total = 0.0;
};

FreeRidingReport free_riding(const GameInstance& instance,
                             const Eigen::VectorXd& x,
                             FreeRidingVariant variant,
                             const std::vector<int>& subset = {});

double metric_value(const GameInstance& instance, const Eigen::VectorXd& x,
                    const MetricSpec& metric);

struct PartitionEvaluation {
  double value = 0.0;
  EquilibriumResult equilibrium;
};

PartitionEvaluation evaluate_partition(const GameInstance& instance,
                                       const Partition& p,
                                       const MetricSpec& metric);

struct RankedPartition {
  Partition partition;
  double value = 0.0;
};

struct SearchOptions {
  int min_block_size = 1;
  int top_k = 5;
  int jobs = 1;
  /// The search refuses n > 14 unless this is set.
  bool allow_large = false;
};

struct SearchReport {
  MetricSpec metric;
  int min_block_size = 1;
  Partition best;
  double value = 0.0;
  std::vector<RankedPartition> top_k;
  std::uint64_t partitions_evaluated = 0;
  double wall_seconds = 0.0;
  /// Equilibrium of the winner, re-derived and LCP-certified.
  EquilibriumResult best_equilibrium;
};

/// Exact optimum over every partition with blocks of at least
/// min_block_size. Ties within 1e-12 go to the lexicographically smaller
/// canonical assignment, so the result does not depend on `jobs`.
SearchReport exhaustive_search(const GameInstance& instance,
                               const MetricSpec& metric,
                               const SearchOptions& options = {});

std::string search_report_to_json(const SearchReport& report);

}  // namespace partobs
