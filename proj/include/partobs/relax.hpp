#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "partobs/game.hpp"
#include "partobs/metrics.hpp"
#include "partobs/partition.hpp"

namespace partobs {

/// Symmetric doubly-stochastic PSD matrices, optionally with every entry
/// capped at 1/L (the image of partitions whose blocks have >= L members).
struct FeasibleSet {
  int n = 0;
  int min_block_size = 1;

  double cap() const { return 1.0 / min_block_size; }
  void validate() const;
};

struct FeasibilityResiduals {
  double row_sum_deviation = 0.0;  // max_i |sum_j H_ij - 1|
  double min_eigenvalue = 0.0;
  double cap_violation = 0.0;      // max(0, max_ij H_ij - cap)
  double min_entry = 0.0;
  double asymmetry = 0.0;          // max_ij |H_ij - H_ji|

  bool within(double tol) const {
    return row_sum_deviation <= tol && min_eigenvalue >= -tol &&
           cap_violation <= tol && min_entry >= -tol && asymmetry <= tol;
  }
};

FeasibilityResiduals feasibility_residuals(const Eigen::MatrixXd& H,
                                           const FeasibleSet& set);

/// Nearest point (Frobenius) of {H symmetric, H 1 = 1, H PSD}. Closed form:
/// with P = I - 11^T/n, the set is 11^T/n + {PSD matrices supported on 1-perp},
/// so the projection is 11^T/n + clamp(P sym(M) P).
Eigen::MatrixXd project_stochastic_psd(const Eigen::MatrixXd& M);

struct ProjectionOptions {
  double tol = 1e-10;
  int max_cycles = 200000;
};

struct ProjectionResult {
  ObservationMatrix H;
  int cycles = 0;
  bool converged = false;
  FeasibilityResiduals residuals;
};

/// Nearest feasible point to M by ADMM, splitting into the stochastic PSD set
/// (closed form above) and the box [0, cap], with adaptive penalty. The
/// returned matrix lies in the box exactly; `converged` is false when
/// max_cycles iterations ran out first.
ProjectionResult project_feasible(const Eigen::MatrixXd& M,
                                  const FeasibleSet& set,
                                  const ProjectionOptions& options = {});

/// Welfare of the Neumann-approximated equilibrium (I + (I-W)H) b.
double relaxed_welfare(const GameInstance& instance, const Eigen::MatrixXd& H);

/// sum over `subset` (all agents when empty) of eta_i at (I + (I-W)H) b.
double relaxed_free_riding(const GameInstance& instance,
                           const Eigen::MatrixXd& H,
                           const std::vector<int>& subset = {});

double relaxed_objective(const GameInstance& instance,
                         const Eigen::MatrixXd& H, const MetricSpec& metric);

/// Gradient of relaxed_welfare in H. With A = I - W, u = (I + AH) b,
/// v = W u and s_i = S_i'(v_i) it is the rank-one matrix
/// A^T (W^T s - c) b^T. Throws NumericalError if some v_i <= 0.
Eigen::MatrixXd grad_welfare(const GameInstance& instance,
                             const Eigen::MatrixXd& H);

/// Gradient of relaxed_free_riding: -(A^T d) b^T with d_i = 1/b_i on the
/// subset and 0 elsewhere. Constant in H.
Eigen::MatrixXd grad_free_riding(const GameInstance& instance,
                                 const std::vector<int>& subset = {});

struct SolverParams {
  /// Frobenius tolerance on the primal residual X - Z, and on the dual
  /// residual relative to max(1, ||gradient||).
  double tol = 1e-10;
  int max_iter = 200000;
  double rho = 1.0;
  bool adapt_rho = true;
  std::uint64_t seed = 0;  // direction of the gradient self-check
};

struct GradientCheck {
  double analytic = 0.0;     // <grad, D>
  double numeric = 0.0;      // central difference along D
  double relative_error = 0.0;
};

struct SolverReport {
  ObservationMatrix H_star;
  double objective = 0.0;
  /// Objective at the box iterate after every iteration.
  std::vector<double> objective_trace;
  FeasibilityResiduals residuals;
  GradientCheck gradient_check;
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  /// False when welfare is optimized without the interiority condition.
  bool interiority_holds = true;
};

/// Maximizes relaxed welfare or minimizes relaxed free riding over the
/// feasible set by ADMM, splitting the stochastic PSD set from the box.
/// Nonlinear objectives enter through a linearized proximal step whose
/// curvature estimate is raised by backtracking.
SolverReport solve_relaxation(const GameInstance& instance,
                              const MetricSpec& metric, const FeasibleSet& set,
                              const SolverParams& params = {});

std::string solver_report_to_json(const SolverReport& report,
                                  const MetricSpec& metric,
                                  const FeasibleSet& set);

/// Row-major CSV, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& M);

}  // namespace partobs
