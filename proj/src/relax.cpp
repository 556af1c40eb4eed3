#include "partobs/relax.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "json.hpp"

namespace partobs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void FeasibleSet::validate() const {
  if (n < 1) throw ValidationError("feasible set needs n >= 1");
  if (min_block_size < 1 || min_block_size > n) {
    throw ValidationError("min block size must lie in 1.." + std::to_string(n));
  }
}

FeasibilityResiduals feasibility_residuals(const MatrixXd& H,
                                           const FeasibleSet& set) {
  FeasibilityResiduals r;
  const MatrixXd sym = 0.5 * (H + H.transpose());
  r.row_sum_deviation =
      (H.rowwise().sum().array() - 1.0).abs().maxCoeff();
  r.row_sum_deviation = std::max(
      r.row_sum_deviation,
      (H.colwise().sum().array() - 1.0).abs().maxCoeff());
  r.min_eigenvalue =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(sym, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  r.cap_violation = std::max(0.0, H.maxCoeff() - set.cap());
  r.min_entry = H.minCoeff();
  r.asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff();
  return r;
}

MatrixXd project_stochastic_psd(const MatrixXd& M) {
  const Eigen::Index n = M.rows();
  const MatrixXd S = 0.5 * (M + M.transpose());
  const VectorXd row_mean = S.rowwise().mean();
  const double grand_mean = row_mean.mean();
  // P S P with P = I - 11^T / n.
  MatrixXd centered = S;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += grand_mean;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(centered);
  const VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  MatrixXd out = eig.eigenvectors() * clamped.asDiagonal() *
                 eig.eigenvectors().transpose();
  out.array() += 1.0 / static_cast<double>(n);
  return 0.5 * (out + out.transpose());
}

ProjectionResult project_feasible(const MatrixXd& M, const FeasibleSet& set,
                                  const ProjectionOptions& options) {
  set.validate();
  if (M.rows() != set.n || M.cols() != set.n) {
    throw ValidationError("matrix to project must be " +
                          std::to_string(set.n) + "x" + std::to_string(set.n));
  }
  const double cap = set.cap();
  const MatrixXd target = 0.5 * (M + M.transpose());
  // ADMM on X in the stochastic PSD set, Z in the box, X = Z.
  MatrixXd z = target.cwiseMax(0.0).cwiseMin(cap);
  MatrixXd u = MatrixXd::Zero(set.n, set.n);
  double rho = 1.0;

  ProjectionResult result;
  for (int cycle = 1; cycle <= options.max_cycles; ++cycle) {
    const MatrixXd x = project_stochastic_psd((target + rho * (z - u)) / (1.0 + rho));
    // Over-relaxed; shortens the slow tail on nearly degenerate inputs.
    const MatrixXd relaxed = 1.5 * x - 0.5 * z;
    MatrixXd next = (relaxed + u).cwiseMax(0.0).cwiseMin(cap);
    u += relaxed - next;
    const double primal = (x - next).norm();
    const double dual = rho * (next - z).norm();
    z = std::move(next);
    result.cycles = cycle;
    if (primal <= options.tol && dual <= options.tol) {
      result.converged = true;
      break;
    }
    if (cycle % 10 == 0) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (dual > 10.0 * primal) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  result.H.H = std::move(z);
  result.H.provenance = ObservationMatrix::Provenance::kRelaxed;
  result.residuals = feasibility_residuals(result.H.H, set);
  return result;
}

namespace {

VectorXd approx_equilibrium(const GameInstance& instance, const MatrixXd& H) {
  const VectorXd hb = H * instance.b();
  return instance.b() + hb - instance.W() * hb;
}

}  // namespace

double relaxed_welfare(const GameInstance& instance, const MatrixXd& H) {
  return welfare(instance, approx_equilibrium(instance, H));
}

double relaxed_free_riding(const GameInstance& instance, const MatrixXd& H,
                           const std::vector<int>& subset) {
  return free_riding(instance, approx_equilibrium(instance, H),
                     FreeRidingVariant::kEta, subset)
      .total;
}

double relaxed_objective(const GameInstance& instance, const MatrixXd& H,
                         const MetricSpec& metric) {
  if (metric.kind == MetricSpec::Kind::kWelfare) {
    return relaxed_welfare(instance, H);
  }
  return relaxed_free_riding(instance, H, metric.subset);
}

MatrixXd grad_welfare(const GameInstance& instance, const MatrixXd& H) {
  const MatrixXd A = instance.influence();
  const VectorXd v = instance.W() * approx_equilibrium(instance, H);
  VectorXd s(instance.n());
  for (int i = 0; i < instance.n(); ++i) {
    if (!(v[i] > 0.0)) {
      throw NumericalError("effective investment of agent " +
                           std::to_string(i + 1) +
                           " is not positive; welfare gradient undefined");
    }
    s[i] = instance.payoff().derivative(i, v[i]);
  }
  const VectorXd left =
      A.transpose() * (instance.W().transpose() * s - instance.c());
  return left * instance.b().transpose();
}

MatrixXd grad_free_riding(const GameInstance& instance,
                          const std::vector<int>& subset) {
  const int n = instance.n();
  VectorXd d = VectorXd::Zero(n);
  if (subset.empty()) {
    d = instance.b().cwiseInverse();
  } else {
    for (int i : subset) d[i] = 1.0 / instance.b()[i];
  }
  return -(instance.influence().transpose() * d) * instance.b().transpose();
}

namespace {

// Everything is minimized internally; welfare enters with a minus sign.
class Objective {
 public:
  Objective(const GameInstance& instance, const MetricSpec& metric)
      : instance_(instance), metric_(metric), sign_(metric.maximize() ? -1 : 1) {
    if (!nonlinear()) {
      const MatrixXd g = grad_free_riding(instance, metric.subset);
      linear_grad_ = 0.5 * (g + g.transpose());
    }
  }

  bool nonlinear() const { return metric_.kind == MetricSpec::Kind::kWelfare; }

  double value(const MatrixXd& H) const {
    return sign_ * relaxed_objective(instance_, H, metric_);
  }

  // Symmetrized: only the symmetric part acts on the feasible set.
  MatrixXd gradient(const MatrixXd& H) const {
    if (!nonlinear()) return linear_grad_;
    const MatrixXd g = grad_welfare(instance_, H);
    return sign_ * 0.5 * (g + g.transpose());
  }

  // Effective investments must stay clear of the sqrt singularity.
  bool admissible(const MatrixXd& H) const {
    if (!nonlinear()) return true;
    const VectorXd v = instance_.W() * approx_equilibrium(instance_, H);
    return v.minCoeff() > 1e-9 * instance_.b().minCoeff();
  }

 private:
  const GameInstance& instance_;
  const MetricSpec& metric_;
  double sign_;
  MatrixXd linear_grad_;
};

GradientCheck check_gradient(const Objective& objective, const MatrixXd& H,
                             std::uint64_t seed) {
  const Eigen::Index n = H.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) D(i, j) = D(j, i) = normal(rng);
  }
  D /= D.norm();
  const double h = 1e-6;
  GradientCheck check;
  check.analytic = (objective.gradient(H).array() * D.array()).sum();
  check.numeric =
      (objective.value(H + h * D) - objective.value(H - h * D)) / (2 * h);
  check.relative_error = std::abs(check.analytic - check.numeric) /
                         std::max(1e-12, std::abs(check.analytic));
  return check;
}

}  // namespace

SolverReport solve_relaxation(const GameInstance& instance,
                              const MetricSpec& metric, const FeasibleSet& set,
                              const SolverParams& params) {
  set.validate();
  if (set.n != instance.n()) {
    throw ValidationError("feasible set size does not match the instance");
  }
  metric.validate(instance.n());
  const int n = set.n;
  const double cap = set.cap();
  const Objective objective(instance, metric);

  SolverReport report;
  if (metric.maximize()) report.interiority_holds = check_interiority(instance).holds;

  // Identity when unconstrained, otherwise the single block: both feasible.
  MatrixXd z = set.min_block_size == 1
                   ? MatrixXd(MatrixXd::Identity(n, n))
                   : MatrixXd(MatrixXd::Constant(n, n, 1.0 / n));
  MatrixXd x = z;
  MatrixXd u = MatrixXd::Zero(n, n);
  double rho = params.rho;
  // Curvature of the linearized proximal term; stays 0 for linear objectives
  // and only ever grows, by backtracking.
  double tau = objective.nonlinear() ? rho : 0.0;

  report.gradient_check = check_gradient(objective, x, params.seed);
  double fx = objective.value(x);

  for (int it = 1; it <= params.max_iter; ++it) {
    const MatrixXd g = objective.gradient(x);
    MatrixXd x_next;
    double f_next = 0.0;
    while (true) {
      x_next = project_stochastic_psd((rho * (z - u) + tau * x - g) /
                                      (rho + tau));
      if (!objective.nonlinear()) break;
      if (objective.admissible(x_next)) {
        f_next = objective.value(x_next);
        const MatrixXd step = x_next - x;
        const double model = fx + (g.array() * step.array()).sum() +
                             0.5 * tau * step.squaredNorm();
        if (f_next <= model + 1e-12 * (1.0 + std::abs(fx))) break;
      }
      tau = std::max(2.0 * tau, 1e-8);
      if (tau > 1e12) {
        throw NumericalError("relaxation step could not keep effective "
                             "investments positive");
      }
    }
    const double x_move = (x_next - x).norm();
    x = std::move(x_next);
    if (objective.nonlinear()) {
      fx = f_next;
    }

    MatrixXd z_next = (x + u).cwiseMax(0.0).cwiseMin(cap);
    const double z_move = (z_next - z).norm();
    z = std::move(z_next);
    u += x - z;

    report.primal_residual = (x - z).norm();
    report.dual_residual = rho * z_move + tau * x_move;
    report.iterations = it;
    report.objective_trace.push_back(objective.value(z) *
                                     (metric.maximize() ? -1.0 : 1.0));
    if (report.primal_residual <= params.tol &&
        report.dual_residual <= params.tol * std::max(1.0, g.norm())) {
      report.converged = true;
      break;
    }
    if (params.adapt_rho && it % 10 == 0) {
      // Balanced on the plain ADMM dual residual; the proximal part does not
      // scale with rho.
      const double z_residual = rho * z_move;
      if (report.primal_residual > 10.0 * z_residual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (z_residual > 10.0 * report.primal_residual) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }

  report.H_star.H = 0.5 * (z + z.transpose());
  report.H_star.provenance = ObservationMatrix::Provenance::kRelaxed;
  report.objective = relaxed_objective(instance, report.H_star.H, metric);
  report.residuals = feasibility_residuals(report.H_star.H, set);
  return report;
}

std::string solver_report_to_json(const SolverReport& r,
                                  const MetricSpec& metric,
                                  const FeasibleSet& set) {
  using nlohmann::json;
  const Eigen::Index n = r.H_star.H.rows();
  json rows = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(r.H_star.H(i, j));
    rows.push_back(std::move(row));
  }
  // Long traces are thinned to at most ~1000 points; the last one is kept.
  json trace = json::array();
  const std::size_t len = r.objective_trace.size();
  const std::size_t stride = std::max<std::size_t>(1, len / 1000);
  for (std::size_t k = 0; k < len; k += stride) {
    trace.push_back({{"iteration", k + 1}, {"objective", r.objective_trace[k]}});
  }
  if (len > 0 && (len - 1) % stride != 0) {
    trace.push_back({{"iteration", len}, {"objective", r.objective_trace.back()}});
  }
  json j;
  j["metric"] = metric.name();
  j["L"] = set.min_block_size;
  j["objective"] = r.objective;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["primal_residual"] = r.primal_residual;
  j["dual_residual"] = r.dual_residual;
  j["interiority_holds"] = r.interiority_holds;
  j["residuals"] = {{"row_sum_deviation", r.residuals.row_sum_deviation},
                    {"min_eigenvalue", r.residuals.min_eigenvalue},
                    {"cap_violation", r.residuals.cap_violation},
                    {"min_entry", r.residuals.min_entry},
                    {"asymmetry", r.residuals.asymmetry}};
  j["gradient_check"] = {{"analytic", r.gradient_check.analytic},
                         {"numeric", r.gradient_check.numeric},
                         {"relative_error", r.gradient_check.relative_error}};
  j["objective_trace"] = std::move(trace);
  j["H_star"] = std::move(rows);
  return j.dump(2) + "\n";
}

void write_matrix_csv(std::ostream& out, const MatrixXd& M) {
  char buf[32];
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", M(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace partobs
