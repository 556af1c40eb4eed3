#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "partobs/relax.hpp"
#include "support.hpp"

using namespace partobs;

namespace {

MatrixXd random_symmetric(int n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) M(i, j) = M(j, i) = normal(rng);
  }
  return M;
}

// Convex combination of exact observation matrices: a feasible point.
MatrixXd random_feasible(int n, int L, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd H = MatrixXd::Zero(n, n);
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double w = u(rng) + 1e-3;
    H += w * h_matrix(testing::random_partition_min(n, L, rng)).H;
    total += w;
  }
  return H / total;
}

double inner(const MatrixXd& a, const MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

}  // namespace

TEST_CASE("closed-form projection onto symmetric stochastic PSD matrices") {
  for (int n : {1, 2, 3, 6}) {
    const MatrixXd J = MatrixXd::Constant(n, n, 1.0 / n);
    CHECK((project_stochastic_psd(MatrixXd::Zero(n, n)) - J).cwiseAbs().maxCoeff() <=
          1e-14);
  }
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 7;
    const MatrixXd M = random_symmetric(n, 1.0, rng);
    const MatrixXd P = project_stochastic_psd(M);
    const FeasibilityResiduals r = feasibility_residuals(P, {n, 1});
    CHECK(r.row_sum_deviation <= 1e-12);
    CHECK(r.min_eigenvalue >= -1e-12);
    CHECK(r.asymmetry == 0.0);
    CHECK((project_stochastic_psd(P) - P).cwiseAbs().maxCoeff() <= 1e-12);
    // Variational inequality against feasible points of the same set.
    for (int k = 0; k < 5; ++k) {
      const MatrixXd Y = random_feasible(n, 1, rng);
      CHECK(inner(M - P, Y - P) <= 1e-10);
    }
  }
}

TEST_CASE("projection of zero without a cap is the uniform matrix") {
  for (int n : {2, 3, 4, 7}) {
    const ProjectionResult r = project_feasible(MatrixXd::Zero(n, n), {n, 1});
    CHECK(r.converged);
    CHECK((r.H.H - MatrixXd::Constant(n, n, 1.0 / n)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(r.H.provenance == ObservationMatrix::Provenance::kRelaxed);
  }
}

TEST_CASE("projection postconditions and optimality") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + trial % 6;
    std::uniform_int_distribution<int> pick(1, n);
    const int L = pick(rng);
    const FeasibleSet set{n, L};
    const MatrixXd M = random_symmetric(n, 0.5, rng) +
                       MatrixXd::Constant(n, n, 1.0 / n);
    const ProjectionResult r = project_feasible(M, set);
    CHECK(r.converged);
    CHECK(r.residuals.row_sum_deviation <= 1e-7);
    CHECK(r.residuals.min_eigenvalue >= -1e-7);
    CHECK(r.residuals.cap_violation <= 1e-7);
    CHECK(r.residuals.min_entry >= -1e-9);
    CHECK(r.residuals.within(1e-7));
    // Nearest point: no feasible point makes an acute angle with M - P.
    for (int k = 0; k < 5; ++k) {
      const MatrixXd Y = random_feasible(n, L, rng);
      CHECK(inner(M - r.H.H, Y - r.H.H) <= 1e-6);
    }
  }
}

TEST_CASE("projection leaves exact observation matrices in place") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 9;
    std::uniform_int_distribution<int> pick(1, n);
    const int L = pick(rng);
    const MatrixXd H = h_matrix(testing::random_partition_min(n, L, rng)).H;
    const ProjectionResult r = project_feasible(H, {n, L});
    CHECK((r.H.H - H).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("projection input checks and cycle cap") {
  CHECK_THROWS_AS(project_feasible(MatrixXd::Zero(3, 3), {4, 1}), ValidationError);
  CHECK_THROWS_AS(project_feasible(MatrixXd::Zero(3, 3), {3, 4}), ValidationError);
  std::mt19937_64 rng(8);
  ProjectionOptions tight;
  tight.max_cycles = 2;
  tight.tol = 1e-14;
  const ProjectionResult r = project_feasible(random_symmetric(6, 1.0, rng), {6, 3}, tight);
  CHECK_FALSE(r.converged);
  CHECK(r.cycles == 2);
}

TEST_CASE("welfare gradient matches finite differences") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const GameInstance g = testing::random_instance(5, 300 + trial);
    const MatrixXd H = random_feasible(5, 1, rng);
    const MatrixXd grad = grad_welfare(g, H);
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        MatrixXd up = H, down = H;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd = (relaxed_welfare(g, up) - relaxed_welfare(g, down)) / (2 * h);
        CHECK(std::abs(fd - grad(i, j)) <= 1e-5 * std::max(1.0, std::abs(grad(i, j))));
      }
    }
    Eigen::JacobiSVD<MatrixXd> svd(grad);
    CHECK(svd.singularValues()[1] <= 1e-12 * svd.singularValues()[0]);
  }
}

TEST_CASE("free-riding gradient matches finite differences") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const GameInstance g = testing::random_instance(5, 400 + trial);
    const MatrixXd H = random_feasible(5, 1, rng);
    for (const std::vector<int>& subset : {std::vector<int>{}, std::vector<int>{1, 3}}) {
      const MatrixXd grad = grad_free_riding(g, subset);
      const double h = 1e-3;  // linear objective: step size is immaterial
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          MatrixXd up = H, down = H;
          up(i, j) += h;
          down(i, j) -= h;
          const double fd = (relaxed_free_riding(g, up, subset) -
                             relaxed_free_riding(g, down, subset)) / (2 * h);
          CHECK(std::abs(fd - grad(i, j)) <= 1e-9 * std::max(1.0, std::abs(grad(i, j))));
        }
      }
    }
  }
}

TEST_CASE("decoupled agents have flat relaxed objectives") {
  VectorXd b(4);
  b << 3, 8, 1, 6;
  const auto g =
      GameInstance::Create(MatrixXd::Identity(4, 4), b, PayoffSpec::Sqrt(4, 200.0));
  std::mt19937_64 rng(1);
  const MatrixXd H = random_feasible(4, 1, rng);
  CHECK(grad_welfare(g, H).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grad_free_riding(g).cwiseAbs().maxCoeff() == 0.0);
  CHECK(relaxed_free_riding(g, H) == 0.0);
}

TEST_CASE("welfare gradient needs positive effective investment") {
  const GameInstance g = testing::random_instance(4, 1);
  CHECK_THROWS_AS(grad_welfare(g, 50.0 * MatrixXd::Identity(4, 4)), NumericalError);
}

TEST_CASE("relaxed optimum dominates every partition") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const GameInstance g = testing::random_instance(6, 500 + seed);
    for (int L : {1, 2}) {
      const FeasibleSet set{6, L};
      for (const MetricSpec& m : {MetricSpec::TotalFreeRiding(), MetricSpec::Welfare()}) {
        const SolverReport r = solve_relaxation(g, m, set);
        CHECK(r.converged);
        CHECK(r.residuals.within(1e-7));
        CHECK(r.residuals.asymmetry == 0.0);
        for_each_partition(6, L, [&](const Partition& p) {
          const double discrete = relaxed_objective(g, h_matrix(p).H, m);
          if (m.maximize()) {
            CHECK(r.objective >= discrete - 1e-6);
          } else {
            CHECK(r.objective <= discrete + 1e-6);
          }
          return true;
        });
      }
    }
  }
}

TEST_CASE("relaxed optima on the printed instance") {
  const GameInstance g = testing::reference_instance();
  // Optima computed independently with a conic solver (SCS, eps 1e-9).
  struct Case {
    MetricSpec metric;
    int L;
    double value;
  };
  const Case cases[] = {
      {MetricSpec::TotalFreeRiding(), 1, 4.2102982},
      {MetricSpec::TotalFreeRiding(), 3, 4.2535395},
      {MetricSpec::Welfare(), 1, 29317.21473},
      {MetricSpec::Welfare(), 3, 29261.09754},
  };
  for (const Case& c : cases) {
    const SolverReport r = solve_relaxation(g, c.metric, {10, c.L});
    CHECK(r.converged);
    CHECK(r.objective == doctest::Approx(c.value).epsilon(1e-7));
    CHECK(r.residuals.within(1e-7));
    CHECK(r.gradient_check.relative_error <= 1e-6);
    CHECK(r.interiority_holds == !c.metric.maximize());
    CHECK_FALSE(r.objective_trace.empty());
    CHECK(r.objective_trace.back() == doctest::Approx(r.objective).epsilon(1e-6));
  }
}

TEST_CASE("unconstrained free-riding optimum has the expected support") {
  const GameInstance g = testing::reference_instance();
  const SolverReport r = solve_relaxation(g, MetricSpec::TotalFreeRiding(), {10, 1});
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < 10; ++i) {
    for (int j = i + 1; j < 10; ++j) {
      if (r.H_star.H(i, j) > 1e-6) edges.insert({i + 1, j + 1});
    }
  }
  const std::set<std::pair<int, int>> expected{{1, 5}, {5, 8}, {2, 9},
                                               {3, 10}, {6, 10}, {7, 10}};
  CHECK(edges == expected);
}

TEST_CASE("free-riding optimum is invariant to scaling b") {
  const GameInstance g = testing::random_instance(6, 77);
  const auto scaled = GameInstance::Create(g.W(), 3.5 * g.b(), g.payoff());
  CHECK((grad_free_riding(g) - grad_free_riding(scaled)).cwiseAbs().maxCoeff() <= 1e-14);
  const MatrixXd a = solve_relaxation(g, MetricSpec::TotalFreeRiding(), {6, 2}).H_star.H;
  const MatrixXd b =
      solve_relaxation(scaled, MetricSpec::TotalFreeRiding(), {6, 2}).H_star.H;
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solver determinism and iteration cap") {
  const GameInstance g = testing::random_instance(6, 5);
  const SolverReport a = solve_relaxation(g, MetricSpec::Welfare(), {6, 2});
  const SolverReport b = solve_relaxation(g, MetricSpec::Welfare(), {6, 2});
  CHECK(a.H_star.H == b.H_star.H);
  CHECK(a.objective_trace == b.objective_trace);

  SolverParams capped;
  capped.max_iter = 3;
  const SolverReport c = solve_relaxation(g, MetricSpec::Welfare(), {6, 2}, capped);
  CHECK_FALSE(c.converged);
  CHECK(c.iterations == 3);

  CHECK_THROWS_AS(solve_relaxation(g, MetricSpec::Welfare(), {5, 1}), ValidationError);
  CHECK_THROWS_AS(solve_relaxation(g, MetricSpec::SubsetFreeRiding({9}), {6, 1}),
                  ValidationError);
}

TEST_CASE("subset free riding") {
  const GameInstance g = testing::random_instance(6, 21);
  const MetricSpec m = MetricSpec::SubsetFreeRiding({0, 2});
  const SolverReport r = solve_relaxation(g, m, {6, 1});
  CHECK(r.converged);
  for_each_partition(6, 1, [&](const Partition& p) {
    CHECK(r.objective <= relaxed_free_riding(g, h_matrix(p).H, {0, 2}) + 1e-6);
    return true;
  });
}

TEST_CASE("report and matrix export") {
  const GameInstance g = testing::random_instance(4, 2);
  const FeasibleSet set{4, 2};
  const SolverReport r = solve_relaxation(g, MetricSpec::TotalFreeRiding(), set);
  const auto j =
      nlohmann::json::parse(solver_report_to_json(r, MetricSpec::TotalFreeRiding(), set));
  CHECK(j["metric"] == "freeriding");
  CHECK(j["L"] == 2);
  CHECK(j["converged"] == true);
  CHECK(j["H_star"].size() == 4);
  CHECK(j["H_star"][1][2].get<double>() == r.H_star.H(1, 2));
  CHECK(j["objective_trace"].back()["iteration"] == r.iterations);
  CHECK(j["residuals"]["row_sum_deviation"].get<double>() <= 1e-7);

  std::ostringstream out;
  MatrixXd M(2, 2);
  M << 0.1, 1, 2.5, -3;
  write_matrix_csv(out, M);
  CHECK(out.str() == "0.10000000000000001,1\n2.5,-3\n");
}
