#include <set>

#include "doctest.h"
#include "json.hpp"
#include "partobs/metrics.hpp"
#include "support.hpp"

using namespace partobs;

namespace {

// Equilibrium and total eta without the library's dynamics: direct solve of
// (I - (I - W) H) x = b, valid for instances meeting the interiority bound.
double oracle_free_riding(const GameInstance& g, const Partition& p) {
  const int n = g.n();
  MatrixXd H = MatrixXd::Zero(n, n);
  for (const auto& block : p.blocks()) {
    for (int i : block) {
      for (int j : block) H(i, j) = 1.0 / block.size();
    }
  }
  const MatrixXd I = MatrixXd::Identity(n, n);
  const VectorXd x = (I - (I - g.W()) * H).fullPivLu().solve(g.b());
  return ((g.b() - x).array() / g.b().array()).sum();
}

std::set<std::vector<int>> all_assignments(int n, int L) {
  std::set<std::vector<int>> out;
  std::vector<int> labels(n, 0);
  while (true) {
    const Partition p = Partition::FromLabels(labels);
    if (p.min_block_size() >= L) out.insert(p.assignment());
    int k = 0;
    while (k < n && ++labels[k] == n) labels[k++] = 0;
    if (k == n) break;
  }
  return out;
}

}  // namespace

TEST_CASE("welfare") {
  const auto lone = GameInstance::Create(MatrixXd::Identity(1, 1),
                                         VectorXd::Constant(1, 100.0),
                                         PayoffSpec::Sqrt(1, 200.0));
  CHECK(welfare(lone, VectorXd::Constant(1, 100.0)) ==
        doctest::Approx(1000.0).epsilon(1e-14));
  CHECK(welfare(testing::reference_instance(), VectorXd::Zero(10)) == 0.0);

  VectorXd b(3);
  b << 10.0, 300.0, 45.0;
  const auto decoupled =
      GameInstance::Create(MatrixXd::Identity(3, 3), b, PayoffSpec::Sqrt(3, 200.0));
  const double at_b = welfare(decoupled, b);
  for (int i = 0; i < 3; ++i) {
    for (double d : {-1.0, -1e-2, 1e-2, 1.0}) {
      VectorXd x = b;
      x[i] += d;
      CHECK(welfare(decoupled, x) < at_b);
    }
  }
}

TEST_CASE("free-riding indices") {
  const GameInstance g = testing::reference_instance();
  const FreeRidingReport none = free_riding(g, g.b(), FreeRidingVariant::kEta);
  CHECK(none.per_agent == VectorXd::Zero(10));
  CHECK(none.total == 0.0);

  VectorXd x = g.b();
  x[0] = 0.5 * g.b()[0];
  x[3] = 0.0;
  const FreeRidingReport eta = free_riding(g, x, FreeRidingVariant::kEta);
  CHECK(eta.per_agent[0] == doctest::Approx(0.5));
  CHECK(eta.per_agent[3] == doctest::Approx(1.0));
  CHECK(eta.total == doctest::Approx(1.5));
  CHECK(free_riding(g, x, FreeRidingVariant::kEta, {3, 5}).total ==
        doctest::Approx(1.0));

  const FreeRidingReport gam = free_riding(g, x, FreeRidingVariant::kGamma);
  for (int i = 0; i < 10; ++i) {
    CHECK(gam.per_agent[i] ==
          doctest::Approx((g.W().row(i).dot(x) - x[i]) / g.b()[i]));
  }

  const auto lone = GameInstance::Create(MatrixXd::Identity(1, 1),
                                         VectorXd::Constant(1, 3.0),
                                         PayoffSpec::Sqrt(1, 200.0));
  const auto eq = evaluate_partition(lone, Partition::Singletons(1),
                                     MetricSpec::TotalFreeRiding());
  CHECK(eq.value == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("indices coincide under full observability") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GameInstance g = testing::random_instance(8, 40 + seed);
    const auto eval = evaluate_partition(g, Partition::Singletons(8),
                                         MetricSpec::TotalFreeRiding());
    const VectorXd& x = eval.equilibrium.x_star;
    const VectorXd eta = free_riding(g, x, FreeRidingVariant::kEta).per_agent;
    const VectorXd gam = free_riding(g, x, FreeRidingVariant::kGamma).per_agent;
    CHECK((eta - gam).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("metric specs") {
  CHECK(parse_metric("welfare", 4).kind == MetricSpec::Kind::kWelfare);
  CHECK(parse_metric("welfare", 4).maximize());
  CHECK(parse_metric("freeriding", 4).kind == MetricSpec::Kind::kTotalFreeRiding);
  const MetricSpec subset = parse_metric("subset:4,1,4", 4);
  CHECK(subset.subset == std::vector<int>{0, 3});
  CHECK(subset.name() == "subset:1,4");
  CHECK_FALSE(subset.maximize());
  CHECK(MetricSpec::TotalFreeRiding().agents(3) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(parse_metric("subset:5", 4), ValidationError);
  CHECK_THROWS_AS(parse_metric("subset:0", 4), ValidationError);
  CHECK_THROWS_AS(parse_metric("subset:", 4), ValidationError);
  CHECK_THROWS_AS(parse_metric("subset:1,x", 4), ValidationError);
  CHECK_THROWS_AS(parse_metric("utility", 4), ValidationError);
}

TEST_CASE("partition evaluation") {
  const GameInstance g = testing::reference_instance();
  const Partition golden = parse_partition("{1,5,8},{2,9},{3,6,7,10},{4}");
  const auto once = evaluate_partition(g, golden, MetricSpec::TotalFreeRiding());
  const auto twice = evaluate_partition(g, golden, MetricSpec::TotalFreeRiding());
  CHECK(once.value == twice.value);
  CHECK(once.value == doctest::Approx(oracle_free_riding(g, golden)).epsilon(1e-12));
  const auto shuffled = evaluate_partition(
      g, parse_partition("{4},{7,10,3,6},{9,2},{8,5,1}"),
      MetricSpec::TotalFreeRiding());
  CHECK(shuffled.value == once.value);

  const auto singletons = evaluate_partition(g, Partition::Singletons(10),
                                             MetricSpec::Welfare());
  const auto transparent = equilibrium(g, MatrixXd::Identity(10, 10));
  CHECK(singletons.value == doctest::Approx(welfare(g, transparent.x_star)));

  CHECK_THROWS_AS(evaluate_partition(g, Partition::Singletons(3),
                                     MetricSpec::Welfare()),
                  ValidationError);
}

TEST_CASE("exhaustive search agrees with a brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const GameInstance g = testing::random_instance(7, 200 + seed);
    for (int L : {1, 2, 3}) {
      double best = std::numeric_limits<double>::infinity();
      std::vector<int> best_assignment;
      const auto assignments = all_assignments(7, L);
      for (const auto& a : assignments) {
        const double v = oracle_free_riding(g, Partition::FromLabels(a));
        if (v < best - 1e-12) {
          best = v;
          best_assignment = a;
        }
      }
      SearchOptions options;
      options.min_block_size = L;
      const SearchReport r =
          exhaustive_search(g, MetricSpec::TotalFreeRiding(), options);
      CHECK(r.partitions_evaluated == assignments.size());
      CHECK(r.value == doctest::Approx(best).epsilon(1e-10));
      CHECK(r.best.assignment() == best_assignment);
      CHECK(r.best.min_block_size() >= L);
      CHECK(r.best_equilibrium.lcp.certified(1e-8));
      REQUIRE(r.top_k.size() == 5);
      for (std::size_t k = 1; k < r.top_k.size(); ++k) {
        CHECK(r.top_k[k - 1].value <= r.top_k[k].value);
      }
    }
  }
}

TEST_CASE("reference instance, unconstrained free riding") {
  const GameInstance g = testing::reference_instance();
  const SearchReport r = exhaustive_search(g, MetricSpec::TotalFreeRiding());
  CHECK(format_partition(r.best) == "{1,5,8},{2,9},{3,6,7,10},{4}");
  CHECK(r.partitions_evaluated == 115975);
}

TEST_CASE("block-size bound can only worsen the optimum") {
  const GameInstance g = testing::reference_instance();
  SearchOptions three;
  three.min_block_size = 3;
  const double unconstrained =
      exhaustive_search(g, MetricSpec::TotalFreeRiding()).value;
  const double bounded =
      exhaustive_search(g, MetricSpec::TotalFreeRiding(), three).value;
  CHECK(bounded >= unconstrained);

  const double w1 = exhaustive_search(g, MetricSpec::Welfare()).value;
  const double w3 = exhaustive_search(g, MetricSpec::Welfare(), three).value;
  CHECK(w3 <= w1);
}

TEST_CASE("decoupled agents make every partition equivalent") {
  VectorXd b(6);
  b << 5, 9, 2, 7, 7, 1;
  const auto g =
      GameInstance::Create(MatrixXd::Identity(6, 6), b, PayoffSpec::Sqrt(6, 200.0));
  for (const MetricSpec& m : {MetricSpec::Welfare(), MetricSpec::TotalFreeRiding()}) {
    std::set<double> values;
    for_each_partition(6, 1, [&](const Partition& p) {
      const auto eval = evaluate_partition(g, p, m);
      CHECK((eval.equilibrium.x_star - b).cwiseAbs().maxCoeff() <= 1e-12);
      values.insert(std::round(eval.value * 1e9));
      return true;
    });
    CHECK(values.size() == 1);
  }
  // Exact ties resolve to the smallest canonical assignment.
  const SearchReport r = exhaustive_search(g, MetricSpec::TotalFreeRiding());
  CHECK(r.best == Partition::SingleBlock(6));
}

TEST_CASE("parallel search matches serial") {
  const GameInstance g = testing::reference_instance();
  for (const MetricSpec& m : {MetricSpec::TotalFreeRiding(), MetricSpec::Welfare(),
                              MetricSpec::SubsetFreeRiding({0, 3, 6})}) {
    SearchOptions serial;
    serial.top_k = 8;
    SearchOptions parallel = serial;
    parallel.jobs = 5;
    const SearchReport a = exhaustive_search(g, m, serial);
    const SearchReport b = exhaustive_search(g, m, parallel);
    CHECK(a.best == b.best);
    CHECK(a.value == b.value);
    CHECK(a.partitions_evaluated == b.partitions_evaluated);
    REQUIRE(a.top_k.size() == b.top_k.size());
    for (std::size_t k = 0; k < a.top_k.size(); ++k) {
      CHECK(a.top_k[k].partition == b.top_k[k].partition);
      CHECK(a.top_k[k].value == b.top_k[k].value);
    }
  }
}

TEST_CASE("search guards and small cases") {
  const auto lone = GameInstance::Create(MatrixXd::Identity(1, 1),
                                         VectorXd::Constant(1, 3.0),
                                         PayoffSpec::Sqrt(1, 200.0));
  const SearchReport r = exhaustive_search(lone, MetricSpec::Welfare());
  CHECK(r.best == Partition::Singletons(1));
  CHECK(r.partitions_evaluated == 1);
  CHECK(r.top_k.size() == 1);

  const GameInstance big = testing::random_instance(15, 1);
  CHECK_THROWS_AS(exhaustive_search(big, MetricSpec::Welfare()), ValidationError);
  SearchOptions too_strict;
  too_strict.min_block_size = 4;
  CHECK_THROWS_AS(exhaustive_search(lone, MetricSpec::Welfare(), too_strict),
                  ValidationError);
}

TEST_CASE("search report JSON") {
  const GameInstance g = testing::random_instance(5, 8);
  SearchOptions options;
  options.min_block_size = 2;
  options.top_k = 3;
  const SearchReport r = exhaustive_search(g, MetricSpec::Welfare(), options);
  const auto j = nlohmann::json::parse(search_report_to_json(r));
  CHECK(j["metric"] == "welfare");
  CHECK(j["L"] == 2);
  CHECK(j["value"].get<double>() == r.value);
  CHECK(j["top_k"].size() == 3);
  CHECK(j["partitions_evaluated"] == r.partitions_evaluated);
  CHECK(j.contains("wall_seconds"));
  CHECK(partition_from_json(j["best"].dump()) == r.best);
  CHECK(j["certificate"]["max_complementarity"].get<double>() <= 1e-8);
}
