// partobs: command-line driver for the partial-observability toolkit.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "partobs/community.hpp"
#include "partobs/dynamics.hpp"
#include "partobs/game.hpp"
#include "partobs/metrics.hpp"
#include "partobs/partition.hpp"
#include "partobs/relax.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace partobs;

namespace {

constexpr int kNumericalFailure = 1;
constexpr int kUsageError = 2;

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json equilibrium_json(const EquilibriumResult& eq) {
  json j;
  j["x_star"] = vector_json(eq.x_star);
  j["iterations"] = eq.iterations;
  j["method"] = eq.method == EquilibriumResult::Method::kIteration
                    ? "iteration"
                    : "interior_solve";
  j["lcp"] = {{"min_slack", eq.lcp.min_slack},
              {"min_action", eq.lcp.min_action},
              {"max_complementarity", eq.lcp.max_complementarity}};
  return j;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

// Accepts partition text, a file holding partition text, or a partition
// JSON file.
Partition read_partition(const std::string& arg, int n) {
  std::string text = arg;
  if (!arg.empty() && arg.front() != '{' && fs::exists(arg)) {
    text = read_file(arg);
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto next = text.find_first_not_of(" \t\r\n", first + 1);
    if (next != std::string::npos && text[next] == '"') {
      return partition_from_json(text, n);
    }
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.pop_back();
  }
  return parse_partition(text, n);
}

Eigen::VectorXd parse_vector(const std::string& text, int n) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ValidationError("bad number '" + item + "' in --x0");
    }
  }
  if (static_cast<int>(values.size()) != n) {
    throw ValidationError("--x0 has " + std::to_string(values.size()) +
                          " entries, instance has " + std::to_string(n));
  }
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    if (!(values[i] >= 0.0)) {
      throw ValidationError("--x0 entry " + std::to_string(i + 1) +
                            " must be nonnegative");
    }
    x[i] = values[i];
  }
  return x;
}

int default_jobs() {
  if (const char* env = std::getenv("PARTOBS_JOBS")) {
    try {
      const int jobs = std::stoi(env);
      if (jobs >= 1) return jobs;
    } catch (const std::logic_error&) {
    }
    throw ValidationError(std::string("PARTOBS_JOBS='") + env +
                          "' is not a positive integer");
  }
  return 1;
}

struct GenArgs {
  GeneratorOptions options;
  std::string out;
};

int run_gen(const GenArgs& args, bool quiet) {
  const GameInstance instance = generate_instance(args.options);
  save_instance(instance, args.out);
  const InteriorityCheck check = check_interiority(instance);
  if (quiet) {
    json j{{"path", args.out},
           {"n", instance.n()},
           {"gamma", instance.gamma()},
           {"interiority_holds", check.holds},
           {"interiority_margin", check.margin}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("wrote %s\n", args.out.c_str());
    std::printf("  agents              %d\n", instance.n());
    std::printf("  gamma               %.6f\n", instance.gamma());
    std::printf("  interiority margin  %.6f (%s)\n", check.margin,
                check.holds ? "holds" : "violated");
  }
  return 0;
}

struct SimulateArgs {
  std::string instance;
  std::string partition;
  std::string x0;
  double tol = 1e-10;
  long max_iter = 1'000'000;
  std::string trace_out;
  std::string out;
};

int run_simulate(const SimulateArgs& args, bool quiet) {
  const GameInstance instance = load_instance(args.instance);
  const Partition p = read_partition(args.partition, instance.n());
  const Eigen::VectorXd x0 = args.x0.empty()
                                 ? Eigen::VectorXd::Zero(instance.n()).eval()
                                 : parse_vector(args.x0, instance.n());
  IterationOptions options;
  options.tol = args.tol;
  options.max_iter = args.max_iter;
  options.record_trace = !args.trace_out.empty();
  const EquilibriumResult eq =
      iterate_equilibrium(instance, h_matrix(p).H, x0, options);

  if (!args.trace_out.empty()) {
    std::ofstream csv(args.trace_out);
    if (!csv) throw ValidationError("cannot write " + args.trace_out);
    write_trajectory_csv(csv, eq.trace);
  }
  json j = equilibrium_json(eq);
  j["partition"] = format_partition(p);
  double max_ratio = 0.0;
  for (double r : eq.ratios) max_ratio = std::max(max_ratio, r);
  j["max_step_ratio"] = max_ratio;
  j["contraction"] = effective_contraction(instance, h_matrix(p).H);
  if (!args.out.empty()) write_file(args.out, j.dump(2) + "\n");

  if (quiet) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("partition   %s\n", format_partition(p).c_str());
  std::printf("iterations  %d (max step ratio %.6f, bound %.6f)\n",
              eq.iterations, max_ratio, j["contraction"].get<double>());
  std::printf("%-6s %16s\n", "agent", "x*");
  for (int i = 0; i < instance.n(); ++i) {
    std::printf("%-6d %16.8f\n", i + 1, eq.x_star[i]);
  }
  std::printf("LCP  min y %.3e  min x %.3e  max |y x| %.3e\n",
              eq.lcp.min_slack, eq.lcp.min_action, eq.lcp.max_complementarity);
  return 0;
}

struct ExhaustiveArgs {
  std::string instance;
  std::string metric = "freeriding";
  int L = 1;
  int k = 5;
  int jobs = 0;
  bool allow_large = false;
  std::string out;
};

void print_ranking(const SearchReport& report) {
  std::printf("%-4s %-44s %18s\n", "rank", "partition", report.metric.name().c_str());
  for (std::size_t r = 0; r < report.top_k.size(); ++r) {
    std::printf("%-4zu %-44s %18.10f\n", r + 1,
                format_partition(report.top_k[r].partition).c_str(),
                report.top_k[r].value);
  }
}

int run_exhaustive(const ExhaustiveArgs& args, bool quiet) {
  const GameInstance instance = load_instance(args.instance);
  SearchOptions options;
  options.min_block_size = args.L;
  options.top_k = args.k;
  options.jobs = args.jobs > 0 ? args.jobs : default_jobs();
  options.allow_large = args.allow_large;
  const SearchReport report = exhaustive_search(
      instance, parse_metric(args.metric, instance.n()), options);
  const std::string text = search_report_to_json(report);
  if (!args.out.empty()) write_file(args.out, text);
  if (quiet) {
    std::cout << text;
    return 0;
  }
  print_ranking(report);
  std::printf("evaluated %llu partitions in %.3f s\n",
              static_cast<unsigned long long>(report.partitions_evaluated),
              report.wall_seconds);
  return 0;
}

struct OptimizeArgs {
  std::string instance;
  std::string metric = "freeriding";
  int L = 1;
  std::string out_prefix;
  bool compare = false;
  double tol = 1e-10;
  int max_iter = 200000;
  std::string overlap = "connection";
  int jobs = 0;
};

int run_optimize(const OptimizeArgs& args, bool quiet) {
  const GameInstance instance = load_instance(args.instance);
  const MetricSpec metric = parse_metric(args.metric, instance.n());
  const FeasibleSet set{instance.n(), args.L};
  set.validate();
  if (args.compare && instance.n() > 12) {
    throw ValidationError("--compare needs n <= 12");
  }
  RoundingOptions rounding;
  if (args.overlap == "fitness") {
    rounding.overlap = RoundingOptions::Overlap::kFitnessGain;
  } else if (args.overlap != "connection") {
    throw ValidationError("--overlap must be connection or fitness");
  }

  SolverParams params;
  params.tol = args.tol;
  params.max_iter = args.max_iter;
  const SolverReport solved = solve_relaxation(instance, metric, set, params);
  const RoundingResult rounded =
      round_to_partition(solved.H_star.H, args.L, rounding);
  const PartitionEvaluation evaluated =
      evaluate_partition(instance, rounded.partition, metric);

  json j = json::parse(solver_report_to_json(solved, metric, set));
  j["partition"] = format_partition(rounded.partition);
  j["partition_value"] = evaluated.value;
  j["equilibrium"] = equilibrium_json(evaluated.equilibrium);
  if (args.compare) {
    SearchOptions options;
    options.min_block_size = args.L;
    options.top_k = 1;
    options.jobs = args.jobs > 0 ? args.jobs : default_jobs();
    const SearchReport best = exhaustive_search(instance, metric, options);
    const double gap = metric.maximize() ? best.value - evaluated.value
                                         : evaluated.value - best.value;
    j["exhaustive"] = {{"best", format_partition(best.best)},
                       {"value", best.value},
                       {"gap", gap},
                       {"identical", best.best == rounded.partition}};
  }

  if (!args.out_prefix.empty()) {
    write_file(args.out_prefix + ".report.json", j.dump(2) + "\n");
    write_file(args.out_prefix + ".partition.txt",
               format_partition(rounded.partition) + "\n");
    std::ofstream csv(args.out_prefix + ".H.csv");
    write_matrix_csv(csv, solved.H_star.H);
    std::ofstream dot(args.out_prefix + ".dot");
    write_dot(dot, WeightedGraph::FromObservation(solved.H_star.H, rounding.threshold),
              rounded.partition);
  }

  if (quiet) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("relaxed %s  %.10f  (%d iterations, %s)\n",
                metric.name().c_str(), solved.objective, solved.iterations,
                solved.converged ? "converged" : "NOT converged");
    std::printf("rounded partition  %s\n",
                format_partition(rounded.partition).c_str());
    std::printf("partition value    %.10f\n", evaluated.value);
    if (args.compare) {
      std::printf("exhaustive best    %s  %.10f  gap %.3e\n",
                  j["exhaustive"]["best"].get<std::string>().c_str(),
                  j["exhaustive"]["value"].get<double>(),
                  j["exhaustive"]["gap"].get<double>());
    }
  }
  if (!solved.converged) {
    std::cerr << "error: relaxation did not converge within " << args.max_iter
              << " iterations\n";
    return kNumericalFailure;
  }
  return 0;
}

struct EvalArgs {
  std::string instance;
  std::string partition;
  std::string metric = "freeriding";
  std::string out;
};

int run_eval(const EvalArgs& args, bool quiet) {
  const GameInstance instance = load_instance(args.instance);
  const Partition p = read_partition(args.partition, instance.n());
  const MetricSpec metric = parse_metric(args.metric, instance.n());
  const PartitionEvaluation result = evaluate_partition(instance, p, metric);
  json j{{"metric", metric.name()},
         {"partition", format_partition(p)},
         {"value", result.value},
         {"equilibrium", equilibrium_json(result.equilibrium)}};
  if (!args.out.empty()) write_file(args.out, j.dump(2) + "\n");
  if (quiet) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("%s  %s = %.12f\n", format_partition(p).c_str(),
                metric.name().c_str(), result.value);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partition design for network games under partial observability"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Print JSON on stdout instead of tables");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a random instance");
  gen_cmd->add_option("--n", gen.options.n, "Number of agents")->required();
  gen_cmd->add_option("--seed", gen.options.seed, "RNG seed");
  gen_cmd->add_option("--gamma", gen.options.gamma, "Contraction factor bound");
  gen_cmd->add_option("--rho", gen.options.rho, "min(b) / max(b)");
  gen_cmd->add_option("--density", gen.options.density, "Edge probability");
  gen_cmd->add_option("--scale", gen.options.payoff_scale, "Payoff scale a");
  gen_cmd->add_option("--out", gen.out, "Instance JSON path")->required();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Best-response dynamics");
  sim_cmd->add_option("--instance", sim.instance)->required();
  sim_cmd->add_option("--partition", sim.partition,
                      "Partition text like {1,2},{3} or a file")->required();
  sim_cmd->add_option("--x0", sim.x0, "Comma-separated start (default 0)");
  sim_cmd->add_option("--tol", sim.tol);
  sim_cmd->add_option("--max-iter", sim.max_iter);
  sim_cmd->add_option("--trace-out", sim.trace_out, "Trajectory CSV path");
  sim_cmd->add_option("--out", sim.out, "Equilibrium JSON path");

  ExhaustiveArgs ex;
  auto* ex_cmd = app.add_subcommand("exhaustive", "Search every partition");
  ex_cmd->add_option("--instance", ex.instance)->required();
  ex_cmd->add_option("--metric", ex.metric, "welfare, freeriding, subset:i,j");
  ex_cmd->add_option("--L", ex.L, "Minimum block size");
  ex_cmd->add_option("--k", ex.k, "Entries kept in the ranking");
  ex_cmd->add_option("--jobs", ex.jobs, "Worker threads (default PARTOBS_JOBS or 1)");
  ex_cmd->add_flag("--allow-large", ex.allow_large, "Permit n > 14");
  ex_cmd->add_option("--out", ex.out, "Report JSON path");

  OptimizeArgs opt;
  auto* opt_cmd = app.add_subcommand("optimize", "Relax, solve and round");
  opt_cmd->add_option("--instance", opt.instance)->required();
  opt_cmd->add_option("--metric", opt.metric);
  opt_cmd->add_option("--L", opt.L);
  opt_cmd->add_option("--out-prefix", opt.out_prefix,
                      "Writes .report.json, .H.csv, .dot, .partition.txt");
  opt_cmd->add_flag("--compare", opt.compare, "Also run the exhaustive search");
  opt_cmd->add_option("--tol", opt.tol);
  opt_cmd->add_option("--max-iter", opt.max_iter);
  opt_cmd->add_option("--overlap", opt.overlap, "connection or fitness");
  opt_cmd->add_option("--jobs", opt.jobs);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate one partition");
  ev_cmd->add_option("--instance", ev.instance)->required();
  ev_cmd->add_option("--partition", ev.partition)->required();
  ev_cmd->add_option("--metric", ev.metric);
  ev_cmd->add_option("--out", ev.out, "Result JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen_cmd) return run_gen(gen, quiet);
    if (*sim_cmd) return run_simulate(sim, quiet);
    if (*ex_cmd) return run_exhaustive(ex, quiet);
    if (*opt_cmd) return run_optimize(opt, quiet);
    if (*ev_cmd) return run_eval(ev, quiet);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kUsageError;
}
