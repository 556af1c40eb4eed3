#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace partobs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised when an instance, partition or file violates a model invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot reach its stopping criterion.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Absolute tolerance for exact-decimal invariants (unit diagonal, signs).
inline constexpr double kInvariantTol = 1e-12;

/// Concave pure-payoff family S_i. Only the root family S_i(x) = a_i * sqrt(x)
/// is provided; other families plug in by supplying value, slope and the
/// inverse of the slope.
class PayoffSpec {
 public:
  enum class Family { kSqrt };

  PayoffSpec() = default;
  /// Uniform scale for all n agents.
  static PayoffSpec Sqrt(int n, double scale);
  /// Per-agent scales; every entry must be positive.
  static PayoffSpec Sqrt(VectorXd scales);

  Family family() const { return family_; }
  int size() const { return static_cast<int>(scale_.size()); }
  const VectorXd& scales() const { return scale_; }
  bool uniform() const;

  double value(int i, double x) const;
  double derivative(int i, double x) const;
  double second_derivative(int i, double x) const;
  /// Returns the x > 0 with S_i'(x) = slope.
  double derivative_inverse(int i, double slope) const;

 private:
  Family family_ = Family::kSqrt;
  VectorXd scale_;
};

/// ||I - W||_inf, i.e. the largest off-diagonal row sum of W.
/// Throws ValidationError for a non-square matrix, a negative off-diagonal
/// entry, a diagonal entry other than 1, or a row sum >= 1.
double contraction_factor(const MatrixXd& W);

/// Network aggregative game with U_i(x) = S_i(W_i x) - c_i x_i.
/// Immutable once created; c is derived from b through c_i = S_i'(b_i).
class GameInstance {
 public:
  /// Validates every invariant and throws ValidationError naming the
  /// offending entry.
  static GameInstance Create(MatrixXd W, VectorXd b, PayoffSpec payoff);

  int n() const { return static_cast<int>(b_.size()); }
  const MatrixXd& W() const { return W_; }
  const VectorXd& b() const { return b_; }
  const VectorXd& c() const { return c_; }
  const PayoffSpec& payoff() const { return payoff_; }
  /// I - W: zero diagonal, nonpositive off-diagonal.
  MatrixXd influence() const;
  double gamma() const { return gamma_; }

  bool operator==(const GameInstance& other) const;

 private:
  GameInstance() = default;

  MatrixXd W_;
  VectorXd b_;
  VectorXd c_;
  PayoffSpec payoff_;
  double gamma_ = 0.0;
};

struct InteriorityCheck {
  bool holds = false;
  /// min(b) - gamma / (1 - gamma) * max(b)
  double margin = 0.0;
  double gamma = 0.0;
};

/// Sufficient condition for a strictly positive equilibrium under any
/// partition: min b > gamma / (1 - gamma) * max b.
InteriorityCheck check_interiority(const GameInstance& instance);

/// U_i(x) for a nonnegative action vector (0-indexed agent).
double payoff(const GameInstance& instance, int i, const VectorXd& x);

struct GeneratorOptions {
  int n = 10;
  std::uint64_t seed = 0;
  double gamma = 0.49;
  /// Lower end of b as a fraction of its maximum; must exceed gamma/(1-gamma).
  double rho = 0.97;
  /// Probability that an off-diagonal entry is nonzero.
  double density = 0.5;
  double payoff_scale = 200.0;
  double b_max = 1000.0;
};

/// Random instance satisfying diagonal dominance with contraction factor
/// <= gamma and the interiority condition. Deterministic in the seed.
GameInstance generate_instance(const GeneratorOptions& options);

void save_instance(const GameInstance& instance,
                   const std::filesystem::path& path);
GameInstance load_instance(const std::filesystem::path& path);

std::string instance_to_json(const GameInstance& instance);
GameInstance instance_from_json(const std::string& text);

}  // namespace partobs
