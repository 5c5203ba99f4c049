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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "dbrs/graph.hpp"

namespace dbrs {

inline constexpr double kDefaultCommCost = 8.0;
inline constexpr double kDefaultBalance = 1.1;
inline constexpr std::uint64_t kSandersCap = 64;

/// Vertex and edge weights of the min-communication balanced cut.
struct WeightedCutProblem {
  std::vector<double> vertex_weights;
  /// aligned with FactorGraph::edges()
  std::vector<double> edge_weights;
  double gamma = kDefaultBalance;
  std::size_t blocks = 1;
};

/// Vertex weight U_i * work_i, edge weight (U_i + U_j) * (message size + c_comm).
/// An empty `update_counts` means U_i = 1 everywhere (the uninformed cut).
WeightedCutProblem make_cut_problem(const FactorGraph& graph, std::span<const double> update_counts,
                                    double c_comm = kDefaultCommCost,
                                    double gamma = kDefaultBalance, std::size_t blocks = 1);

struct Partitioning {
  std::vector<std::uint32_t> block_of;
  std::vector<std::uint32_t> worker_of_block;
  std::size_t workers = 1;
  /// the balance constraint could not be met
  bool violated = false;

  std::size_t blocks() const { return worker_of_block.size(); }
  std::uint32_t worker_of(VertexId v) const { return worker_of_block[block_of[v]]; }
  std::vector<std::vector<VertexId>> vertices_by_worker() const;
};

/// Multilevel recursive bisection into problem.blocks blocks; block b is
/// mapped to worker b.  Deterministic for a given seed.
Partitioning partition(const FactorGraph& graph, const WeightedCutProblem& problem,
                       std::uint64_t seed);

/// Cut into k * workers blocks, then deal exactly k random blocks to each worker.
Partitioning over_partition_and_assign(const FactorGraph& graph, WeightedCutProblem problem,
                                       std::size_t workers, std::size_t k, std::uint64_t seed);

/// Sum of edge weights whose endpoints sit on different workers.
double communication_cost(const FactorGraph& graph, const WeightedCutProblem& problem,
                          const Partitioning& part);

std::vector<double> worker_work(const WeightedCutProblem& problem, const Partitioning& part);
std::vector<double> block_work(const WeightedCutProblem& problem, const Partitioning& part);
/// workers * max worker work / total work
double work_balance(const WeightedCutProblem& problem, const Partitioning& part);

struct RelativeMetrics {
  double rel_com_cost = 0.0;
  double rel_work_balance = 0.0;
};

/// Compare an uninformed cut with an informed one, weighting both with the
/// measured update counts.
RelativeMetrics relative_metrics(const FactorGraph& graph, const Partitioning& uninformed,
                                 const Partitioning& informed, std::span<const double> true_counts,
                                 double c_comm = kDefaultCommCost);

/// Suggested over-partitioning factor ceil(p^(1 / log2(1 / (sigma + 1/2)))).
/// sigma = 1/2 makes the exponent diverge and returns kSandersCap.
std::uint64_t sanders_k(std::size_t workers, double sigma);

// Partition file: `DBRSPART 1 <n_vertices> <m_blocks> <p_workers>` then
// `<vertex_id> <block_id> <worker_id>` per vertex.
void write_partitioning(const Partitioning& part, std::ostream& out);
Partitioning read_partitioning(std::istream& in);
void save_partitioning(const Partitioning& part, const std::filesystem::path& path);
Partitioning load_partitioning(const std::filesystem::path& path);

// Update-count file: `<vertex_id> <U_i>` per line.
void write_update_counts(std::span<const std::uint64_t> counts, std::ostream& out);
std::vector<double> read_update_counts(std::istream& in, std::size_t num_vertices);
std::vector<double> load_update_counts(const std::filesystem::path& path, std::size_t num_vertices);

}  // namespace dbrs
