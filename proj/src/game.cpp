#include "partobs/game.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace partobs {

namespace {

std::string entry_name(int i, int j) {
  // 1-indexed, matching every external format.
  return "W[" + std::to_string(i + 1) + "][" + std::to_string(j + 1) + "]";
}

}  // namespace

PayoffSpec PayoffSpec::Sqrt(int n, double scale) {
  return Sqrt(VectorXd::Constant(n, scale));
}

PayoffSpec PayoffSpec::Sqrt(VectorXd scales) {
  for (Eigen::Index i = 0; i < scales.size(); ++i) {
    if (!std::isfinite(scales[i]) || scales[i] <= 0.0) {
      throw ValidationError("payoff scale for agent " + std::to_string(i + 1) +
                            " must be positive and finite");
    }
  }
  PayoffSpec spec;
  spec.family_ = Family::kSqrt;
  spec.scale_ = std::move(scales);
  return spec;
}

bool PayoffSpec::uniform() const {
  if (scale_.size() == 0) return true;
  return (scale_.array() == scale_[0]).all();
}

double PayoffSpec::value(int i, double x) const {
  return scale_[i] * std::sqrt(x);
}

double PayoffSpec::derivative(int i, double x) const {
  return 0.5 * scale_[i] / std::sqrt(x);
}

double PayoffSpec::second_derivative(int i, double x) const {
  return -0.25 * scale_[i] / (x * std::sqrt(x));
}

double PayoffSpec::derivative_inverse(int i, double slope) const {
  const double r = 0.5 * scale_[i] / slope;
  return r * r;
}

double contraction_factor(const MatrixXd& W) {
  if (W.rows() != W.cols() || W.rows() == 0) {
    throw ValidationError("W must be a nonempty square matrix, got " +
                          std::to_string(W.rows()) + "x" +
                          std::to_string(W.cols()));
  }
  const int n = static_cast<int>(W.rows());
  double gamma = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(W(i, i)) || std::abs(W(i, i) - 1.0) > kInvariantTol) {
      throw ValidationError("diagonal entry " + entry_name(i, i) +
                            " must equal 1");
    }
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!std::isfinite(W(i, j)) || W(i, j) < 0.0) {
        throw ValidationError("off-diagonal entry " + entry_name(i, j) +
                              " must be finite and nonnegative");
      }
      row += W(i, j);
    }
    if (row >= 1.0) {
      throw ValidationError("row " + std::to_string(i + 1) +
                            " of W is not diagonally dominant (off-diagonal "
                            "sum " + std::to_string(row) + ")");
    }
    gamma = std::max(gamma, row);
  }
  return gamma;
}

GameInstance GameInstance::Create(MatrixXd W, VectorXd b, PayoffSpec payoff) {
  const double gamma = contraction_factor(W);
  if (b.size() != W.rows()) {
    throw ValidationError("b has length " + std::to_string(b.size()) +
                          " but W is " + std::to_string(W.rows()) + "x" +
                          std::to_string(W.cols()));
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (!std::isfinite(b[i]) || b[i] <= 0.0) {
      throw ValidationError("b[" + std::to_string(i + 1) +
                            "] must be positive and finite");
    }
  }
  if (payoff.size() != b.size()) {
    throw ValidationError("payoff spec covers " +
                          std::to_string(payoff.size()) + " agents, expected " +
                          std::to_string(b.size()));
  }
  GameInstance g;
  g.W_ = std::move(W);
  g.b_ = std::move(b);
  g.payoff_ = std::move(payoff);
  g.gamma_ = gamma;
  g.c_.resize(g.b_.size());
  for (int i = 0; i < g.n(); ++i) g.c_[i] = g.payoff_.derivative(i, g.b_[i]);
  return g;
}

MatrixXd GameInstance::influence() const {
  return MatrixXd::Identity(n(), n()) - W_;
}

bool GameInstance::operator==(const GameInstance& other) const {
  return W_ == other.W_ && b_ == other.b_ &&
         payoff_.scales() == other.payoff_.scales();
}

InteriorityCheck check_interiority(const GameInstance& instance) {
  InteriorityCheck check;
  check.gamma = instance.gamma();
  const double bound =
      check.gamma / (1.0 - check.gamma) * instance.b().maxCoeff();
  check.margin = instance.b().minCoeff() - bound;
  check.holds = check.margin > 0.0;
  return check;
}

double payoff(const GameInstance& instance, int i, const VectorXd& x) {
  if (i < 0 || i >= instance.n()) {
    throw std::out_of_range("agent index " + std::to_string(i) +
                            " out of range");
  }
  if (x.size() != instance.n()) {
    throw ValidationError("action vector has wrong length");
  }
  if ((x.array() < 0.0).any()) {
    throw ValidationError("actions must be nonnegative");
  }
  const double effective = instance.W().row(i).dot(x);
  return instance.payoff().value(i, effective) - instance.c()[i] * x[i];
}

GameInstance generate_instance(const GeneratorOptions& o) {
  if (o.n < 1) throw ValidationError("n must be at least 1");
  if (!(o.gamma > 0.0 && o.gamma < 1.0)) {
    throw ValidationError("gamma must lie in (0, 1)");
  }
  const double threshold = o.gamma / (1.0 - o.gamma);
  if (!(o.rho > threshold && o.rho <= 1.0)) {
    throw ValidationError("rho must lie in (gamma/(1-gamma), 1] = (" +
                          std::to_string(threshold) + ", 1]");
  }
  if (!(o.density >= 0.0 && o.density <= 1.0)) {
    throw ValidationError("density must lie in [0, 1]");
  }

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = o.n;

  MatrixXd W = MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (unit(rng) < o.density) {
        // (0, 1] keeps sampled entries strictly positive.
        W(i, j) = 1.0 - unit(rng);
        total += W(i, j);
      }
    }
    const double target = o.gamma * (0.5 + 0.5 * unit(rng));
    if (total > 0.0) {
      for (int j = 0; j < n; ++j) {
        if (j != i) W(i, j) *= target / total;
      }
    }
  }

  VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    b[i] = o.b_max * (o.rho + (1.0 - o.rho) * unit(rng));
  }
  return GameInstance::Create(std::move(W), std::move(b),
                              PayoffSpec::Sqrt(n, o.payoff_scale));
}

std::string instance_to_json(const GameInstance& instance) {
  using nlohmann::json;
  const int n = instance.n();
  json j;
  j["n"] = n;
  json rows = json::array();
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int k = 0; k < n; ++k) row.push_back(instance.W()(i, k));
    rows.push_back(std::move(row));
  }
  j["W"] = std::move(rows);
  j["b"] = std::vector<double>(instance.b().data(), instance.b().data() + n);
  json payoff_json;
  payoff_json["family"] = "sqrt";
  const VectorXd& s = instance.payoff().scales();
  if (instance.payoff().uniform()) {
    payoff_json["scale"] = s[0];
  } else {
    payoff_json["scale"] = std::vector<double>(s.data(), s.data() + n);
  }
  j["payoff"] = std::move(payoff_json);
  return j.dump(2) + "\n";
}

GameInstance instance_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed instance JSON: ") + e.what());
  }
  try {
    const int n = j.at("n").get<int>();
    if (n < 1) throw ValidationError("n must be at least 1");
    const auto& rows = j.at("W");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
      throw ValidationError("W must have n = " + std::to_string(n) + " rows");
    }
    MatrixXd W(n, n);
    for (int i = 0; i < n; ++i) {
      const auto& row = rows[i];
      if (!row.is_array() || static_cast<int>(row.size()) != n) {
        throw ValidationError("row " + std::to_string(i + 1) +
                              " of W must have " + std::to_string(n) +
                              " entries");
      }
      for (int k = 0; k < n; ++k) W(i, k) = row[k].get<double>();
    }
    const auto bv = j.at("b").get<std::vector<double>>();
    if (static_cast<int>(bv.size()) != n) {
      throw ValidationError("b must have " + std::to_string(n) + " entries");
    }
    VectorXd b = Eigen::Map<const VectorXd>(bv.data(), n);

    const auto& p = j.at("payoff");
    if (p.at("family").get<std::string>() != "sqrt") {
      throw ValidationError("unsupported payoff family '" +
                            p.at("family").get<std::string>() + "'");
    }
    PayoffSpec spec;
    if (p.at("scale").is_array()) {
      const auto sv = p.at("scale").get<std::vector<double>>();
      if (static_cast<int>(sv.size()) != n) {
        throw ValidationError("payoff.scale must have " + std::to_string(n) +
                              " entries");
      }
      spec = PayoffSpec::Sqrt(Eigen::Map<const VectorXd>(sv.data(), n));
    } else {
      spec = PayoffSpec::Sqrt(n, p.at("scale").get<double>());
    }

    GameInstance g = GameInstance::Create(std::move(W), std::move(b), spec);
    if (j.contains("c")) {
      const auto cv = j.at("c").get<std::vector<double>>();
      if (static_cast<int>(cv.size()) != n) {
        throw ValidationError("c must have " + std::to_string(n) + " entries");
      }
      for (int i = 0; i < n; ++i) {
        if (std::abs(cv[i] - g.c()[i]) > 1e-9 * std::max(1.0, std::abs(cv[i]))) {
          throw ValidationError("c[" + std::to_string(i + 1) +
                                "] is inconsistent with S'(b)");
        }
      }
    }
    return g;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed instance JSON: ") + e.what());
  }
}

void save_instance(const GameInstance& instance,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << instance_to_json(instance);
}

GameInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return instance_from_json(buffer.str());
}

}  // namespace partobs
