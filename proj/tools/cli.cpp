/*
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */


#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include "dbrs/models.hpp"
#include "dbrs/oracle.hpp"
#include "dbrs/partitioner.hpp"
#include "dbrs/runtime.hpp"

namespace dbrs::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::get("dbrs");
    if (!l) l = spdlog::stderr_color_mt("dbrs");
    const char* level = std::getenv("DBRS_LOG");
    l->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    return l;
  }();
  return log;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  fs::path p = base;
  p.replace_extension();
  return p.string() + suffix;
}

// -- generate -----------------------------------------------------------------

struct GenerateArgs {
  DenoiseSpec spec;
  std::string out;
  bool no_pgm = false;
};

int generate_denoise_cmd(const GenerateArgs& a) {
  try {
    a.spec.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const DenoiseProblem problem = generate_denoise(a.spec);
  save_graph(problem.graph, a.out);
  if (!a.no_pgm) {
    write_pgm(problem.clean, a.spec.colors, with_suffix(a.out, ".clean.pgm"));
    write_pgm(problem.noisy, a.spec.colors, with_suffix(a.out, ".noisy.pgm"));
  }
  logger()->info("wrote {} ({} variables, {} factors)", a.out, problem.graph.num_variables(),
                 problem.graph.num_factors());
  return ok;
}

int generate_chain_cmd(const std::string& out) {
  save_graph(premature_convergence_chain().graph, out);
  return ok;
}

// -- partition ----------------------------------------------------------------

struct PartitionArgs {
  std::string graph;
  std::size_t workers = 1;
  std::size_t k = 1;
  double gamma = kDefaultBalance;
  double c_comm = kDefaultCommCost;
  std::uint64_t seed = 1;
  std::string update_counts;
  std::string out;
  std::string metrics;
};

int partition_cmd(const PartitionArgs& a) {
  const FactorGraph graph = load_graph(a.graph);
  std::vector<double> counts;
  if (!a.update_counts.empty()) counts = load_update_counts(a.update_counts, graph.num_vertices());
  if (a.workers * a.k > graph.num_vertices()) {
    throw UsageError("workers * overpartition exceeds the vertex count");
  }
  const WeightedCutProblem problem = make_cut_problem(graph, counts, a.c_comm, a.gamma);
  const Partitioning part = over_partition_and_assign(graph, problem, a.workers, a.k, a.seed);
  save_partitioning(part, a.out);

  const json report{{"cut_cost", communication_cost(graph, problem, part)},
                    {"work_balance", work_balance(problem, part)},
                    {"blocks", part.blocks()},
                    {"workers", part.workers},
                    {"violated", part.violated}};
  if (part.violated) logger()->warn("balance constraint gamma={} could not be met", a.gamma);
  std::cout << report.dump() << '\n';
  if (!a.metrics.empty()) open_out(a.metrics) << report.dump() << '\n';
  return ok;
}

// -- infer --------------------------------------------------------------------

struct InferArgs {
  std::string graph;
  std::string partition;
  RuntimeParams params;
  std::string schedule = "belief";
  std::uint64_t seed = 1;
  bool deterministic = false;
  bool random_schedule = false;
  std::string out;
  std::string counts;
  std::string metrics;
};

Partitioning load_matching_partition(const std::string& path, const FactorGraph& graph) {
  if (path.empty()) {
    Partitioning whole;
    whole.block_of.assign(graph.num_vertices(), 0);
    whole.worker_of_block = {0};
    whole.workers = 1;
    return whole;
  }
  Partitioning part = load_partitioning(path);
  if (part.block_of.size() != graph.num_vertices()) {
    throw UsageError("partition lists " + std::to_string(part.block_of.size()) +
                     " vertices but the graph has " + std::to_string(graph.num_vertices()));
  }
  return part;
}

ScheduleMode parse_mode(const std::string& s) {
  if (s == "belief") return ScheduleMode::belief;
  if (s == "message") return ScheduleMode::message;
  throw UsageError("--schedule must be belief or message");
}

RunOptions run_options(bool deterministic, bool random_schedule, std::uint64_t seed) {
  RunOptions o;
  o.driver = random_schedule ? Driver::random_schedule
             : deterministic ? Driver::round_robin
                             : Driver::threads;
  o.schedule_seed = seed;
  return o;
}

void write_metrics(const std::vector<LoopMetrics>& metrics, std::ostream& out) {
  for (const LoopMetrics& m : metrics) {
    out << json{{"worker", m.worker},           {"loop", m.loop},
                {"updates", m.updates},         {"splash_work", m.splash_work},
                {"msgs_sent", m.msgs_sent},     {"msgs_recv", m.msgs_recv},
                {"bytes_sent", m.bytes_sent},   {"max_residual", m.max_residual},
                {"wall_ns", m.wall_ns}}
               .dump()
        << '\n';
  }
}

int infer_cmd(InferArgs a) {
  const FactorGraph graph = load_graph(a.graph);
  const Partitioning part = load_matching_partition(a.partition, graph);
  a.params.mode = parse_mode(a.schedule);
  if (a.params.flush_interval < 1) throw UsageError("--flush must be >= 1");
  if (!(a.params.damping >= 0.0 && a.params.damping < 1.0)) throw UsageError("--damping must lie in [0, 1)");
  if (!(a.params.beta >= 0.0)) throw UsageError("--beta must be nonnegative");

  const InferenceResult r =
      run_inference(graph, part, a.params, run_options(a.deterministic, a.random_schedule, a.seed));
  save_beliefs(r.beliefs, a.out);
  if (!a.counts.empty()) {
    auto out = open_out(a.counts);
    write_update_counts(r.update_counts, out);
  }
  if (!a.metrics.empty()) {
    auto out = open_out(a.metrics);
    write_metrics(r.metrics, out);
  }
  std::cout << json{{"converged", r.converged},
                    {"budget_exhausted", r.budget_exhausted},
                    {"updates", r.total_updates},
                    {"msgs_sent", r.termination.sent},
                    {"msgs_recv", r.termination.received},
                    {"max_residual", r.termination.max_residual}}
                   .dump()
            << '\n';
  if (!r.converged) logger()->warn("update budget exhausted before convergence");
  return r.converged ? ok : not_converged;
}

// -- validate -----------------------------------------------------------------

struct ValidateArgs {
  std::string beliefs;
  std::string against = "exact";
  std::string graph;
  std::uint64_t samples = 125000;
  std::uint64_t burn_in = 25000;
  std::uint64_t seed = 1;
  std::size_t worst = 5;
  // accuracy-vs-updates trace
  std::string trace;
  std::uint64_t trace_every = 0;
  std::string partition;
  RuntimeParams params;
  std::string schedule = "belief";
};

Beliefs reference_beliefs(const ValidateArgs& a) {
  if (a.against == "exact" || a.against == "gibbs") {
    if (a.graph.empty()) throw UsageError("--graph is required for --against " + a.against);
    const FactorGraph graph = load_graph(a.graph);
    if (a.against == "exact") return exact_marginals(graph);
    if (a.samples <= a.burn_in) throw UsageError("--samples must exceed --burn-in");
    return gibbs_marginals(graph, a.samples, a.burn_in, a.seed);
  }
  return load_beliefs(a.against);
}

json accuracy_report(const Beliefs& beliefs, const Beliefs& reference, std::size_t worst) {
  const auto l1 = per_variable_l1(beliefs, reference);
  std::vector<std::size_t> order(l1.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return l1[x] > l1[y]; });
  json worst_cases = json::array();
  for (std::size_t i = 0; i < std::min(worst, order.size()); ++i) {
    worst_cases.push_back({{"variable", order[i]}, {"l1", l1[order[i]]}});
  }
  return json{{"accuracy", accuracy(beliefs, reference)},
              {"variables", l1.size()},
              {"worst", worst_cases}};
}

int validate_cmd(ValidateArgs a) {
  if (a.beliefs.empty() && a.trace.empty()) throw UsageError("give --beliefs, --trace, or both");
  const Beliefs reference = reference_beliefs(a);
  json report = json::object();
  if (!a.beliefs.empty()) {
    try {
      report = accuracy_report(load_beliefs(a.beliefs), reference, a.worst);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
  }
  if (!a.trace.empty()) {
    if (a.graph.empty()) throw UsageError("--trace needs --graph");
    const FactorGraph graph = load_graph(a.graph);
    const Partitioning part = load_matching_partition(a.partition, graph);
    a.params.mode = parse_mode(a.schedule);
    RunOptions o = run_options(true, false, a.seed);
    o.trace_every = a.trace_every > 0 ? a.trace_every : std::max<std::uint64_t>(1, graph.num_vertices() / 4);
    auto csv = open_out(a.trace);
    csv << "updates,accuracy\n";
    csv.precision(10);
    o.trace = [&](std::uint64_t updates, const Beliefs& b) {
      csv << updates << ',' << accuracy(b, reference) << '\n';
    };
    const InferenceResult r = run_inference(graph, part, a.params, o);
    csv << r.total_updates << ',' << accuracy(r.beliefs, reference) << '\n';
    report["trace"] = a.trace;
    report["trace_final_accuracy"] = accuracy(r.beliefs, reference);
    report["trace_updates"] = r.total_updates;
  }
  std::cout << report.dump() << '\n';
  return ok;
}

void add_runtime_options(CLI::App* cmd, RuntimeParams& p, std::string& schedule) {
  cmd->add_option("--beta", p.beta, "convergence threshold")->capture_default_str();
  cmd->add_option("--damping", p.damping, "weight on the old message")->capture_default_str();
  cmd->add_option("--splash-work", p.w_max, "splash work bound (0 = 2 * total work / workers)");
  cmd->add_option("--flush", p.flush_interval, "splash loops between external sends")->capture_default_str();
  cmd->add_option("--schedule", schedule, "belief | message")->capture_default_str();
  cmd->add_option("--max-updates", p.max_updates, "per-worker vertex-update budget");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Distributed residual-splash belief propagation"};
  app.name(args.empty() ? "dbrsplash" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a model file");
  generate->require_subcommand(1);
  auto* denoise = generate->add_subcommand("denoise", "grid MRF for image denoising");
  denoise->add_option("--width", gen.spec.width)->capture_default_str();
  denoise->add_option("--height", gen.spec.height)->capture_default_str();
  denoise->add_option("--colors", gen.spec.colors)->capture_default_str();
  denoise->add_option("--sigma", gen.spec.sigma, "Gaussian observation noise")->capture_default_str();
  denoise->add_option("--strength", gen.spec.strength, "Potts penalty, bottom half")->capture_default_str();
  denoise->add_option("--top-scale", gen.spec.top_strength_scale, "top-half strength multiplier")
      ->capture_default_str();
  denoise->add_option("--seed", gen.spec.seed)->capture_default_str();
  denoise->add_option("--out", gen.out)->required();
  denoise->add_flag("--no-pgm", gen.no_pgm, "skip the clean/noisy PGM images");
  std::string chain_out;
  auto* chain = generate->add_subcommand("chain-4-3", "5-variable premature-convergence chain");
  chain->add_option("--out", chain_out)->required();

  PartitionArgs pa;
  auto* partition = app.add_subcommand("partition", "over-partitioned balanced cut");
  partition->add_option("--graph", pa.graph)->required()->check(CLI::ExistingFile);
  partition->add_option("--workers,-p", pa.workers)->check(CLI::PositiveNumber)->capture_default_str();
  partition->add_option("--overpartition,-k", pa.k)->check(CLI::PositiveNumber)->capture_default_str();
  partition->add_option("--gamma", pa.gamma, "balance coefficient")->check(CLI::Range(1.0, 1e9))
      ->capture_default_str();
  partition->add_option("--ccomm", pa.c_comm, "per-message header cost")->capture_default_str();
  partition->add_option("--seed", pa.seed)->capture_default_str();
  partition->add_option("--update-counts", pa.update_counts, "measured U_i from a prior run")
      ->check(CLI::ExistingFile);
  partition->add_option("--out", pa.out)->required();
  partition->add_option("--metrics", pa.metrics, "also write the JSON summary here");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "run distributed residual-splash BP");
  infer->add_option("--graph", ia.graph)->required()->check(CLI::ExistingFile);
  infer->add_option("--partition", ia.partition, "partition file (default: one worker)")
      ->check(CLI::ExistingFile);
  add_runtime_options(infer, ia.params, ia.schedule);
  infer->add_option("--seed", ia.seed, "seed for --random-schedule")->capture_default_str();
  infer->add_flag("--deterministic", ia.deterministic, "single-threaded round-robin workers");
  infer->add_flag("--random-schedule", ia.random_schedule, "seeded random step/delivery order");
  infer->add_option("--out", ia.out, "beliefs file")->required();
  infer->add_option("--update-counts", ia.counts, "per-vertex update counts file");
  infer->add_option("--metrics", ia.metrics, "JSONL loop metrics");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "accuracy against a reference");
  validate->add_option("--beliefs", va.beliefs)->check(CLI::ExistingFile);
  validate->add_option("--against", va.against, "exact | gibbs | <beliefs file>")->capture_default_str();
  validate->add_option("--graph", va.graph)->check(CLI::ExistingFile);
  validate->add_option("--samples", va.samples, "Gibbs sweeps including burn-in")->capture_default_str();
  validate->add_option("--burn-in", va.burn_in)->capture_default_str();
  validate->add_option("--seed", va.seed)->capture_default_str();
  validate->add_option("--worst", va.worst, "worst variables to list")->capture_default_str();
  validate->add_option("--trace", va.trace, "run inference and write updates,accuracy CSV here");
  validate->add_option("--trace-every", va.trace_every, "updates between trace rows");
  validate->add_option("--partition", va.partition)->check(CLI::ExistingFile);
  add_runtime_options(validate, va.params, va.schedule);

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend());
    if (!rest.empty()) rest.pop_back();
    app.parse(rest);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    if (denoise->parsed()) return generate_denoise_cmd(gen);
    if (chain->parsed()) return generate_chain_cmd(chain_out);
    if (partition->parsed()) return partition_cmd(pa);
    if (infer->parsed()) return infer_cmd(ia);
    if (validate->parsed()) return validate_cmd(va);
  } catch (const UsageError& e) {
    std::cerr << app.get_name() << ": " << e.what() << '\n';
    return usage;
  } catch (const CapacityError& e) {
    std::cerr << app.get_name() << ": " << e.what() << '\n';
    return capacity;
  } catch (const ParseError& e) {
    std::cerr << app.get_name() << ": " << e.what() << '\n';
    return usage;
  } catch (const ArgumentError& e) {
    std::cerr << app.get_name() << ": " << e.what() << '\n';
    return usage;
  } catch (const std::exception& e) {
    std::cerr << app.get_name() << ": " << e.what() << '\n';
    return failure;
  }
  return usage;
}

}  // namespace dbrs::cli
