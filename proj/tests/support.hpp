#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partobs/game.hpp"
#include "partobs/partition.hpp"

namespace testing {

inline std::string data_path(const std::string& name) {
  return std::string(PARTOBS_DATA_DIR) + "/" + name;
}

inline partobs::GameInstance reference_instance() {
  return partobs::load_instance(data_path("reference_instance.json"));
}

inline partobs::GameInstance random_instance(int n, std::uint64_t seed,
                                             double gamma = 0.49) {
  partobs::GeneratorOptions o;
  o.n = n;
  o.seed = seed;
  o.gamma = gamma;
  return partobs::generate_instance(o);
}

// Uniform block labels, then canonicalized; not uniform over set partitions.
inline partobs::Partition random_partition(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> blocks(1, n);
  const int m = blocks(rng);
  std::uniform_int_distribution<int> pick(0, m - 1);
  std::vector<int> labels(n);
  for (int& l : labels) l = pick(rng);
  return partobs::Partition::FromLabels(labels);
}

// Random partition whose blocks all have at least L members.
inline partobs::Partition random_partition_min(int n, int L,
                                               std::mt19937_64& rng) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> blocks(1, std::max(1, n / L));
  const int m = blocks(rng);
  std::vector<int> labels(n);
  for (int k = 0; k < n; ++k) labels[order[k]] = k < m * L ? k / L : -1;
  std::uniform_int_distribution<int> pick(0, m - 1);
  for (int k = m * L; k < n; ++k) labels[order[k]] = pick(rng);
  return partobs::Partition::FromLabels(labels);
}

}  // namespace testing
