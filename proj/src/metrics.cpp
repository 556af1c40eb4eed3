#include "partobs/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace partobs {

MetricSpec MetricSpec::SubsetFreeRiding(std::vector<int> agents) {
  std::sort(agents.begin(), agents.end());
  agents.erase(std::unique(agents.begin(), agents.end()), agents.end());
  return {Kind::kSubsetFreeRiding, std::move(agents)};
}

void MetricSpec::validate(int n) const {
  if (kind != Kind::kSubsetFreeRiding) return;
  if (subset.empty()) throw ValidationError("free-riding subset is empty");
  for (int i : subset) {
    if (i < 0 || i >= n) {
      throw ValidationError("subset agent " + std::to_string(i + 1) +
                            " is outside 1.." + std::to_string(n));
    }
  }
}

std::vector<int> MetricSpec::agents(int n) const {
  if (kind == Kind::kSubsetFreeRiding) return subset;
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  return all;
}

std::string MetricSpec::name() const {
  switch (kind) {
    case Kind::kWelfare:
      return "welfare";
    case Kind::kTotalFreeRiding:
      return "freeriding";
    case Kind::kSubsetFreeRiding: {
      std::string s = "subset:";
      for (std::size_t k = 0; k < subset.size(); ++k) {
        if (k) s += ',';
        s += std::to_string(subset[k] + 1);
      }
      return s;
    }
  }
  return "unknown";
}

MetricSpec parse_metric(const std::string& text, int n) {
  if (text == "welfare") return MetricSpec::Welfare();
  if (text == "freeriding") return MetricSpec::TotalFreeRiding();
  const std::string prefix = "subset:";
  if (text.rfind(prefix, 0) == 0) {
    std::vector<int> agents;
    std::stringstream ss(text.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        const int agent = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        agents.push_back(agent - 1);
      } catch (const std::logic_error&) {
        throw ValidationError("bad agent '" + item + "' in metric subset");
      }
    }
    MetricSpec spec = MetricSpec::SubsetFreeRiding(std::move(agents));
    spec.validate(n);
    return spec;
  }
  throw ValidationError("unknown metric '" + text +
                        "' (expected welfare, freeriding or subset:i,j,...)");
}

double welfare(const GameInstance& instance, const Eigen::VectorXd& x) {
  const Eigen::VectorXd effective = instance.W() * x;
  double total = 0.0;
  for (int i = 0; i < instance.n(); ++i) {
    total += instance.payoff().value(i, effective[i]) - instance.c()[i] * x[i];
  }
  return total;
}

FreeRidingReport free_riding(const GameInstance& instance,
                             const Eigen::VectorXd& x,
                             FreeRidingVariant variant,
                             const std::vector<int>& subset) {
  const Eigen::VectorXd& b = instance.b();
  FreeRidingReport report;
  if (variant == FreeRidingVariant::kEta) {
    report.per_agent = (b - x).cwiseQuotient(b);
  } else {
    report.per_agent = (instance.W() * x - x).cwiseQuotient(b);
  }
  if (subset.empty()) {
    report.total = report.per_agent.sum();
  } else {
    for (int i : subset) report.total += report.per_agent[i];
  }
  return report;
}

double metric_value(const GameInstance& instance, const Eigen::VectorXd& x,
                    const MetricSpec& metric) {
  switch (metric.kind) {
    case MetricSpec::Kind::kWelfare:
      return welfare(instance, x);
    case MetricSpec::Kind::kTotalFreeRiding:
      return free_riding(instance, x, FreeRidingVariant::kEta).total;
    case MetricSpec::Kind::kSubsetFreeRiding:
      return free_riding(instance, x, FreeRidingVariant::kEta, metric.subset)
          .total;
  }
  return 0.0;
}

PartitionEvaluation evaluate_partition(const GameInstance& instance,
                                       const Partition& p,
                                       const MetricSpec& metric) {
  if (p.n() != instance.n()) {
    throw ValidationError("partition covers " + std::to_string(p.n()) +
                          " agents, instance has " +
                          std::to_string(instance.n()));
  }
  metric.validate(instance.n());
  PartitionEvaluation out;
  out.equilibrium = equilibrium(instance, h_matrix(p).H);
  out.value = metric_value(instance, out.equilibrium.x_star, metric);
  return out;
}

namespace {

constexpr double kTieTol = 1e-12;

struct Ranking {
  bool maximize;

  bool operator()(const RankedPartition& a, const RankedPartition& b) const {
    const double diff = maximize ? b.value - a.value : a.value - b.value;
    if (diff < -kTieTol) return true;
    if (diff > kTieTol) return false;
    return a.partition < b.partition;
  }
};

void keep_top(std::vector<RankedPartition>& top, RankedPartition candidate,
              std::size_t k, const Ranking& better) {
  if (top.size() == k && !better(candidate, top.back())) return;
  auto pos = std::upper_bound(top.begin(), top.end(), candidate, better);
  top.insert(pos, std::move(candidate));
  if (top.size() > k) top.pop_back();
}

}  // namespace

SearchReport exhaustive_search(const GameInstance& instance,
                               const MetricSpec& metric,
                               const SearchOptions& options) {
  const int n = instance.n();
  if (n > 14 && !options.allow_large) {
    throw ValidationError("exhaustive search over " + std::to_string(n) +
                          " agents is intractable; pass the override to force "
                          "it");
  }
  if (options.min_block_size < 1 || options.min_block_size > n) {
    throw ValidationError("min block size must lie in 1.." +
                          std::to_string(n));
  }
  metric.validate(n);
  const auto start = std::chrono::steady_clock::now();

  const std::size_t k = static_cast<std::size_t>(std::max(1, options.top_k));
  const Ranking better{metric.maximize()};
  const int L = options.min_block_size;
  const std::uint64_t total = count_partitions(n, L);
  const int jobs = static_cast<int>(
      std::clamp<std::uint64_t>(options.jobs < 1 ? 1 : options.jobs, 1,
                                std::max<std::uint64_t>(total, 1)));

  std::vector<std::vector<RankedPartition>> partial(jobs);
  std::vector<std::uint64_t> evaluated(jobs, 0);
  auto worker = [&](int job) {
    const std::uint64_t first = total * job / jobs;
    const std::uint64_t last = total * (job + 1) / jobs;
    evaluated[job] = for_each_partition_in_range(
        n, L, first, last, [&](const Partition& p) {
          const EquilibriumResult eq = equilibrium(instance, h_matrix(p).H);
          keep_top(partial[job],
                   {p, metric_value(instance, eq.x_star, metric)}, k, better);
          return true;
        });
  };

  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    for (int job = 0; job < jobs; ++job) threads.emplace_back(worker, job);
    for (auto& t : threads) t.join();
  }

  SearchReport report;
  report.metric = metric;
  report.min_block_size = L;
  for (int job = 0; job < jobs; ++job) {
    report.partitions_evaluated += evaluated[job];
    for (auto& entry : partial[job]) keep_top(report.top_k, entry, k, better);
  }
  if (report.top_k.empty()) {
    throw NumericalError("no partition satisfies the block-size bound");
  }
  report.best = report.top_k.front().partition;
  report.value = report.top_k.front().value;
  report.best_equilibrium = equilibrium(instance, h_matrix(report.best).H);
  report.wall_seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return report;
}

std::string search_report_to_json(const SearchReport& r) {
  using nlohmann::json;
  json top = json::array();
  for (const auto& entry : r.top_k) {
    json e = json::parse(partition_to_json(entry.partition));
    e["value"] = entry.value;
    top.push_back(std::move(e));
  }
  json j;
  j["metric"] = r.metric.name();
  j["L"] = r.min_block_size;
  j["best"] = json::parse(partition_to_json(r.best));
  j["value"] = r.value;
  j["top_k"] = std::move(top);
  j["partitions_evaluated"] = r.partitions_evaluated;
  j["wall_seconds"] = r.wall_seconds;
  const auto& lcp = r.best_equilibrium.lcp;
  j["certificate"] = {{"min_slack", lcp.min_slack},
                      {"min_action", lcp.min_action},
                      {"max_complementarity", lcp.max_complementarity}};
  return j.dump(2) + "\n";
}

}  // namespace partobs
