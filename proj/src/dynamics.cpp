#include "partobs/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

namespace partobs {

namespace {

void check_dims(const GameInstance& instance, const Eigen::MatrixXd& H) {
  if (H.rows() != instance.n() || H.cols() != instance.n()) {
    throw ValidationError("observation matrix must be " +
                          std::to_string(instance.n()) + "x" +
                          std::to_string(instance.n()));
  }
}

// Exact solve of the equilibrium system restricted to the support of x, with
// the other coordinates held at zero.
Eigen::VectorXd support_solve(const GameInstance& instance,
                              const Eigen::MatrixXd& H,
                              const Eigen::VectorXd& x) {
  std::vector<int> support;
  for (int i = 0; i < instance.n(); ++i) {
    if (x[i] > 0.0) support.push_back(i);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(instance.n());
  if (support.empty()) return out;
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(instance.n(), instance.n()) -
      instance.influence() * H;
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd sub(k, k);
  Eigen::VectorXd rhs(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    rhs[r] = instance.b()[support[r]];
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = system(support[r], support[c]);
  }
  const Eigen::VectorXd solved = sub.fullPivLu().solve(rhs);
  for (Eigen::Index r = 0; r < k; ++r) out[support[r]] = solved[r];
  return out;
}

}  // namespace

double effective_contraction(const GameInstance& instance,
                             const Eigen::MatrixXd& H) {
  check_dims(instance, H);
  return (instance.influence() * H).cwiseAbs().rowwise().sum().maxCoeff();
}

Eigen::VectorXd br_step(const GameInstance& instance, const Eigen::MatrixXd& H,
                        const Eigen::VectorXd& x) {
  check_dims(instance, H);
  if (x.size() != instance.n()) {
    throw ValidationError("state vector must have length " +
                          std::to_string(instance.n()));
  }
  const Eigen::VectorXd estimate = H * x;
  return (estimate - instance.W() * estimate + instance.b()).cwiseMax(0.0);
}

EquilibriumResult iterate_equilibrium(const GameInstance& instance,
                                      const Eigen::MatrixXd& H,
                                      const Eigen::VectorXd& x0,
                                      const IterationOptions& options) {
  if ((x0.array() < 0.0).any()) {
    throw ValidationError("initial actions must be nonnegative");
  }
  if (!(options.tol > 0.0)) throw ValidationError("tol must be positive");
  const double gamma = effective_contraction(instance, H);
  if (gamma >= 1.0) {
    throw NumericalError("best response map is not a contraction: ||(I-W)H|| = " +
                         std::to_string(gamma));
  }
  const double threshold = options.tol * (1.0 - gamma);

  EquilibriumResult result;
  result.method = EquilibriumResult::Method::kIteration;
  if (options.record_trace) result.trace.push_back(x0);

  Eigen::VectorXd x = x0;
  double previous_step = -1.0;
  for (long t = 1; t <= options.max_iter; ++t) {
    Eigen::VectorXd next = br_step(instance, H, x);
    const double step = (next - x).lpNorm<Eigen::Infinity>();
    if (previous_step > 0.0) result.ratios.push_back(step / previous_step);
    previous_step = step;
    x = std::move(next);
    if (options.record_trace) result.trace.push_back(x);
    result.iterations = static_cast<int>(t);
    if (step <= threshold) {
      result.x_star = x;
      result.lcp = lcp_check(instance, H, x);
      // The iterate fixes the support; solving on it removes the last
      // tol-sized error. Kept only if it is a better certificate nearby.
      const Eigen::VectorXd polished = support_solve(instance, H, x);
      const LcpResidual lcp = lcp_check(instance, H, polished);
      const double rounding = 64.0 * std::numeric_limits<double>::epsilon() *
                              instance.b().lpNorm<Eigen::Infinity>();
      if (polished.allFinite() && lcp.min_action >= 0.0 &&
          lcp.min_slack >= std::min(0.0, result.lcp.min_slack) - rounding &&
          lcp.max_complementarity <= result.lcp.max_complementarity &&
          (polished - x).lpNorm<Eigen::Infinity>() <= options.tol) {
        result.x_star = polished;
        result.lcp = lcp;
      }
      return result;
    }
  }
  const double last_ratio = result.ratios.empty() ? 0.0 : result.ratios.back();
  throw NumericalError("best response iteration did not converge within " +
                       std::to_string(options.max_iter) +
                       " steps (last contraction ratio " +
                       std::to_string(last_ratio) + ")");
}

std::optional<EquilibriumResult> interior_solve(const GameInstance& instance,
                                                const Eigen::MatrixXd& H) {
  check_dims(instance, H);
  const int n = instance.n();
  const Eigen::MatrixXd system =
      Eigen::MatrixXd::Identity(n, n) - instance.influence() * H;
  Eigen::VectorXd x;
  if (effective_contraction(instance, H) < 1.0) {
    // Strictly diagonally dominant by rows, so partial pivoting is safe.
    x = system.partialPivLu().solve(instance.b());
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) {
      throw NumericalError("equilibrium system I - (I-W)H is singular");
    }
    x = lu.solve(instance.b());
  }
  if (!(x.minCoeff() > 1e-10)) return std::nullopt;

  EquilibriumResult result;
  result.method = EquilibriumResult::Method::kInteriorSolve;
  result.x_star = std::move(x);
  result.lcp = lcp_check(instance, H, result.x_star);
  return result;
}

LcpResidual lcp_check(const GameInstance& instance, const Eigen::MatrixXd& H,
                      const Eigen::VectorXd& x) {
  check_dims(instance, H);
  const Eigen::VectorXd hx = H * x;
  const Eigen::VectorXd y = x - (hx - instance.W() * hx) - instance.b();
  LcpResidual r;
  r.min_slack = y.minCoeff();
  r.min_action = x.minCoeff();
  r.max_complementarity = y.cwiseProduct(x).cwiseAbs().maxCoeff();
  return r;
}

Eigen::VectorXd neumann_approx(const GameInstance& instance,
                               const Eigen::MatrixXd& H) {
  check_dims(instance, H);
  const Eigen::VectorXd hb = H * instance.b();
  return instance.b() + hb - instance.W() * hb;
}

EquilibriumResult equilibrium(const GameInstance& instance,
                              const Eigen::MatrixXd& H) {
  if (auto interior = interior_solve(instance, H)) return *std::move(interior);
  return iterate_equilibrium(instance, H,
                             Eigen::VectorXd::Zero(instance.n()));
}

void write_trajectory_csv(std::ostream& out,
                          const std::vector<Eigen::VectorXd>& trace) {
  const Eigen::Index n = trace.empty() ? 0 : trace.front().size();
  out << 't';
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << (i + 1);
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < trace.size(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", trace[t][i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace partobs
