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


#include <doctest.h>

#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "dbrs/models.hpp"
#include "dbrs/partitioner.hpp"
#include "dbrs/scheduler.hpp"
#include "fixtures.hpp"

using namespace dbrs;

namespace {

WeightedCutProblem unit_problem(const FactorGraph& g, double gamma, std::size_t blocks) {
  WeightedCutProblem p;
  p.vertex_weights.assign(g.num_vertices(), 1.0);
  p.edge_weights.assign(g.num_edges(), 1.0);
  p.gamma = gamma;
  p.blocks = blocks;
  return p;
}

std::size_t cut_edges(const FactorGraph& g, const Partitioning& part) {
  std::size_t n = 0;
  for (const auto& [a, b] : g.edges()) n += part.block_of[a] != part.block_of[b];
  return n;
}

}  // namespace

TEST_CASE("cut problem weights") {
  const FactorGraph g({2, 5}, {FactorTable{{0, 1}, std::vector<double>(10, 1.0)}, FactorTable{{1}, std::vector<double>(5, 1.0)}});
  const WeightedCutProblem uninformed = make_cut_problem(g, {}, 8.0);
  CHECK(uninformed.vertex_weights[0] == 2.0);   // 1 neighbor * 2
  CHECK(uninformed.vertex_weights[2] == 20.0);  // pairwise: 2 neighbors * 10
  CHECK(uninformed.edge_weights[0] == 2.0 * (2 + 8));
  CHECK(uninformed.edge_weights[1] == 2.0 * (5 + 8));
  const std::vector<double> counts{3, 1, 2, 1};
  const WeightedCutProblem informed = make_cut_problem(g, counts, 8.0);
  CHECK(informed.vertex_weights[0] == 6.0);
  CHECK(informed.edge_weights[0] == (3 + 2) * 10.0);
  CHECK_THROWS_AS(make_cut_problem(g, std::vector<double>{1.0}, 8.0), ArgumentError);
  CHECK_THROWS_AS(make_cut_problem(g, {}, 8.0, 0.9), ArgumentError);
}

TEST_CASE("trivial partitions") {
  const FactorGraph g = random_chain(30, 2, 1);
  const auto p = make_cut_problem(g, {}, kDefaultCommCost, kDefaultBalance, 1);
  const Partitioning one = partition(g, p, 1);
  CHECK(std::all_of(one.block_of.begin(), one.block_of.end(), [](auto b) { return b == 0; }));
  CHECK(communication_cost(g, p, one) == 0.0);

  auto all = p;
  all.blocks = g.num_vertices();
  const Partitioning singletons = partition(g, all, 1);
  CHECK(std::set<std::uint32_t>(singletons.block_of.begin(), singletons.block_of.end()).size() == g.num_vertices());
  const double total = std::accumulate(p.edge_weights.begin(), p.edge_weights.end(), 0.0);
  CHECK(communication_cost(g, all, singletons) == doctest::Approx(total));

  auto too_many = p;
  too_many.blocks = g.num_vertices() + 1;
  CHECK_THROWS_AS(partition(g, too_many, 1), ArgumentError);
}

TEST_CASE("bisection of a unit chain cuts one edge") {
  for (std::size_t n : {20u, 100u, 400u}) {
    const FactorGraph g = random_chain(2 * n, 2, 1);  // 2n vertices on a path
    REQUIRE(g.num_vertices() == 2 * n);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Partitioning part = partition(g, unit_problem(g, 1.05, 2), seed);
      CHECK(cut_edges(g, part) == 1);
      CHECK_FALSE(part.violated);
      const auto loads = block_work(unit_problem(g, 1.05, 2), part);
      CHECK(std::max(loads[0], loads[1]) <= 1.05 * n);
    }
  }
}

TEST_CASE("grid partitions are balanced, cheap and deterministic") {
  DenoiseSpec spec;
  spec.width = 40;
  spec.height = 40;
  spec.colors = 3;
  const FactorGraph g = generate_denoise(spec).graph;
  for (std::size_t m : {2u, 3u, 4u, 8u, 16u}) {
    const auto p = make_cut_problem(g, {}, kDefaultCommCost, kDefaultBalance, m);
    const Partitioning a = partition(g, p, 7);
    const Partitioning b = partition(g, p, 7);
    CHECK(a.block_of == b.block_of);
    CHECK_FALSE(a.violated);
    const auto loads = block_work(p, a);
    const double total = std::accumulate(loads.begin(), loads.end(), 0.0);
    for (double w : loads) CHECK(w <= kDefaultBalance * total / static_cast<double>(m) + 1e-9);
    // strips would cut about (m - 1) * 40 pairwise factors; a sane cut is within a small factor
    const double edge_cost = p.edge_weights.front();
    CHECK(communication_cost(g, p, a) < 3.0 * static_cast<double>(m) * 40.0 * 2.0 * edge_cost);
  }
}

TEST_CASE("communication cost counts only cross-worker edges") {
  const FactorGraph g({2}, {FactorTable{{0}, {1, 1}}});
  WeightedCutProblem p = unit_problem(g, 1.1, 2);
  p.edge_weights = {7.0};
  Partitioning part;
  part.block_of = {0, 1};
  part.worker_of_block = {0, 1};
  part.workers = 2;
  CHECK(communication_cost(g, p, part) == 7.0);
  part.worker_of_block = {0, 0};
  CHECK(communication_cost(g, p, part) == 0.0);
}

TEST_CASE("row strips of a grid") {
  DenoiseSpec spec;
  spec.width = 6;
  spec.height = 8;
  spec.colors = 2;
  const FactorGraph g = generate_denoise(spec).graph;
  const auto p = make_cut_problem(g, {}, kDefaultCommCost);
  const std::size_t strips = 4;
  Partitioning part;
  part.workers = strips;
  part.worker_of_block = {0, 1, 2, 3};
  part.block_of.assign(g.num_vertices(), 0);
  // a factor follows its first scope variable
  auto row_of = [&](VertexId v) { return v / static_cast<VertexId>(spec.width); };
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const VertexId anchor = g.is_variable(v) ? v : g.factor(v).scope.front();
    part.block_of[v] = static_cast<std::uint32_t>(row_of(anchor) / 2);
  }
  // crossing edges: each vertical factor between strip rows touches the lower variable across the boundary
  double expected = 0.0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const auto [var, fac] = g.edges()[e];
    if (part.block_of[var] != part.block_of[fac]) expected += p.edge_weights[e];
  }
  CHECK(expected == doctest::Approx((strips - 1) * spec.width * p.edge_weights.front()));
  CHECK(communication_cost(g, p, part) == doctest::Approx(expected));
}

TEST_CASE("over-partitioning assigns exactly k blocks per worker") {
  const FactorGraph g = generate_denoise(DenoiseSpec{30, 30, 3, 1.0, 1.0, 0.5, 3}).graph;
  const auto p = make_cut_problem(g, {}, kDefaultCommCost);
  for (std::size_t k : {1u, 2u, 5u}) {
    const Partitioning part = over_partition_and_assign(g, p, 4, k, 11);
    CHECK(part.blocks() == 4 * k);
    std::vector<int> per_worker(4, 0);
    for (auto w : part.worker_of_block) ++per_worker[w];
    for (int c : per_worker) CHECK(c == static_cast<int>(k));
  }
  // k = 1 matches the direct cut up to relabeling
  const Partitioning direct = partition(g, [&] { auto q = p; q.blocks = 4; return q; }(), 11);
  const Partitioning k1 = over_partition_and_assign(g, p, 4, 1, 11);
  CHECK(direct.block_of == k1.block_of);
  CHECK(communication_cost(g, p, direct) == doctest::Approx(communication_cost(g, p, k1)));
}

TEST_CASE("relative metrics") {
  const FactorGraph g = generate_denoise(DenoiseSpec{20, 20, 3, 1.0, 1.0, 0.5, 1}).graph;
  const auto p = make_cut_problem(g, {}, kDefaultCommCost, kDefaultBalance, 4);
  const Partitioning part = partition(g, p, 3);
  const std::vector<double> ones(g.num_vertices(), 1.0);
  const RelativeMetrics same = relative_metrics(g, part, part, ones);
  CHECK(same.rel_com_cost == doctest::Approx(1.0));
  CHECK(same.rel_work_balance == doctest::Approx(work_balance(make_cut_problem(g, ones), part)));

  Partitioning whole;
  whole.block_of.assign(g.num_vertices(), 0);
  whole.worker_of_block = {0};
  CHECK_THROWS_AS(relative_metrics(g, part, whole, ones), ArgumentError);
  CHECK(work_balance(p, whole) == doctest::Approx(1.0));
}

TEST_CASE("suggested over-partitioning factor") {
  CHECK(sanders_k(8, 1e-9) == 8);
  CHECK(sanders_k(120, 1e-12) == 120);
  CHECK(sanders_k(8, 0.5) == kSandersCap);
  const double direct = std::ceil(std::pow(120.0, 1.0 / std::log2(1.0 / 0.75)));
  CHECK(static_cast<double>(sanders_k(120, 0.25)) == direct);
  CHECK(sanders_k(1, 0.3) == 1);
  CHECK_THROWS_AS(sanders_k(8, 0.0), ArgumentError);
  CHECK_THROWS_AS(sanders_k(8, 0.6), ArgumentError);
}

TEST_CASE("partition and update-count files") {
  const FactorGraph g = random_chain(12, 2, 1);
  const Partitioning part = over_partition_and_assign(g, make_cut_problem(g, {}), 2, 2, 5);
  std::stringstream ss;
  write_partitioning(part, ss);
  const Partitioning back = read_partitioning(ss);
  CHECK(back.block_of == part.block_of);
  CHECK(back.worker_of_block == part.worker_of_block);
  CHECK(back.workers == 2);

  std::istringstream bad_header("DBRSPART 2 3 1 1\n");
  CHECK_THROWS_AS(read_partitioning(bad_header), ParseError);
  std::istringstream missing("DBRSPART 1 2 1 1\n0 0 0\n");
  CHECK_THROWS_AS(read_partitioning(missing), ParseError);
  std::istringstream conflict("DBRSPART 1 2 1 2\n0 0 0\n1 0 1\n");
  CHECK_THROWS_AS(read_partitioning(conflict), ParseError);

  const std::vector<std::uint64_t> counts{3, 1, 4};
  std::stringstream cs;
  write_update_counts(counts, cs);
  CHECK(read_update_counts(cs, 3) == std::vector<double>{3, 1, 4});
  std::istringstream short_counts("0 1\n");
  CHECK_THROWS_AS(read_update_counts(short_counts, 2), ParseError);
}

TEST_CASE("partitioning a large grid stays fast") {
  const FactorGraph g = generate_denoise(DenoiseSpec{200, 200, 5, 1.0, 1.0, 0.5, 1}).graph;
  const auto p = make_cut_problem(g, {}, kDefaultCommCost);
  const auto start = std::chrono::steady_clock::now();
  const Partitioning part = over_partition_and_assign(g, p, 8, 10, 1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("200x200 grid into 80 blocks took " << secs << " s");
  CHECK(secs < 10.0);
  CHECK_FALSE(part.violated);
}
