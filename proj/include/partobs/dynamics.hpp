#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "partobs/game.hpp"
#include "partobs/partition.hpp"

namespace partobs {

/// Residuals of the complementarity conditions
///   y = (I - (I - W) H) x - b,  y >= 0,  x >= 0,  y^T x = 0.
struct LcpResidual {
  double min_slack = 0.0;              // min_i y_i
  double min_action = 0.0;             // min_i x_i
  double max_complementarity = 0.0;    // max_i |y_i x_i|

  bool certified(double eps) const {
    return min_slack >= -eps && min_action >= 0.0 &&
           max_complementarity <= eps;
  }
};

struct EquilibriumResult {
  enum class Method { kIteration, kInteriorSolve };

  Eigen::VectorXd x_star;
  int iterations = 0;
  /// x(0), x(1), ... when tracing was requested.
  std::vector<Eigen::VectorXd> trace;
  /// ||x(t+2) - x(t+1)|| / ||x(t+1) - x(t)|| for every step with a nonzero
  /// denominator.
  std::vector<double> ratios;
  LcpResidual lcp;
  Method method = Method::kIteration;
};

/// One best-response step: max(0, (I - W) H x + b).
Eigen::VectorXd br_step(const GameInstance& instance, const Eigen::MatrixXd& H,
                        const Eigen::VectorXd& x);

struct IterationOptions {
  double tol = 1e-10;
  long max_iter = 1'000'000;
  bool record_trace = false;
};

/// Fixed-point iteration of the best-response map. Stops once
/// ||x(t+1) - x(t)||_inf <= tol * (1 - gamma), gamma = ||(I - W) H||_inf,
/// which puts the last iterate within tol of the true fixed point. The
/// returned x_star is that iterate refined by an exact solve on its support
/// whenever the refinement certifies at least as well.
/// Throws NumericalError when max_iter is exhausted or gamma >= 1.
EquilibriumResult iterate_equilibrium(const GameInstance& instance,
                                      const Eigen::MatrixXd& H,
                                      const Eigen::VectorXd& x0,
                                      const IterationOptions& options = {});

/// Solves (I - (I - W) H) x = b. Returns nullopt when the solution is not
/// strictly positive (min entry <= 1e-10), in which case the equilibrium has
/// zero coordinates and must be found by iteration.
std::optional<EquilibriumResult> interior_solve(const GameInstance& instance,
                                                const Eigen::MatrixXd& H);

LcpResidual lcp_check(const GameInstance& instance, const Eigen::MatrixXd& H,
                      const Eigen::VectorXd& x);

/// First two Neumann terms: (I + (I - W) H) b. No positivity clamp.
Eigen::VectorXd neumann_approx(const GameInstance& instance,
                               const Eigen::MatrixXd& H);

/// Interior solve with iteration fallback.
EquilibriumResult equilibrium(const GameInstance& instance,
                              const Eigen::MatrixXd& H);

/// ||(I - W) H||_inf.
double effective_contraction(const GameInstance& instance,
                             const Eigen::MatrixXd& H);

/// Header `t,x1,...,xn`, one row per recorded state, 12 significant digits.
void write_trajectory_csv(std::ostream& out,
                          const std::vector<Eigen::VectorXd>& trace);

}  // namespace partobs
