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


// Small graph builders and comparison helpers shared by the tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dbrs/bp.hpp"
#include "dbrs/graph.hpp"
#include "dbrs/oracle.hpp"

namespace dbrs::testing {

inline Vector lin(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline Vector log_of(std::initializer_list<double> values) { return normalize_log(to_log(lin(values))); }

inline double l1(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().sum(); }

/// Random tree-structured factor graph: every new variable hangs off an earlier
/// one through a pairwise or (occasionally) a ternary factor, plus unary evidence.
inline FactorGraph random_tree(std::mt19937_64& rng, std::size_t max_vars = 12) {
  std::uniform_int_distribution<std::size_t> n_dist(2, max_vars);
  std::uniform_int_distribution<int> card_dist(2, 4);
  std::uniform_real_distribution<double> entry(0.05, 1.0);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = n_dist(rng);
  std::vector<int> cards(n);
  for (int& c : cards) c = card_dist(rng);

  std::vector<FactorTable> factors;
  auto table_for = [&](std::vector<VertexId> scope) {
    std::size_t size = 1;
    for (VertexId v : scope) size *= static_cast<std::size_t>(cards[v]);
    FactorTable t{std::move(scope), std::vector<double>(size)};
    for (double& x : t.values) x = entry(rng);
    return t;
  };
  VertexId next = 1;
  while (next < n) {
    std::uniform_int_distribution<VertexId> parent(0, next - 1);
    const VertexId p = parent(rng);
    if (next + 1 < n && coin(rng) && coin(rng)) {
      factors.push_back(table_for({next, p, next + 1}));
      next += 2;
    } else {
      factors.push_back(table_for({p, next}));
      next += 1;
    }
  }
  for (VertexId v = 0; v < n; ++v) {
    if (coin(rng)) factors.push_back(table_for({v}));
  }
  return FactorGraph(std::move(cards), std::move(factors));
}

/// Random loopy graph over `n` variables with pairwise and unary factors.
inline FactorGraph random_loopy(std::mt19937_64& rng, std::size_t n, std::size_t pairs) {
  std::uniform_int_distribution<int> card_dist(2, 3);
  std::uniform_int_distribution<VertexId> var(0, static_cast<VertexId>(n - 1));
  std::uniform_real_distribution<double> entry(0.1, 1.0);
  std::vector<int> cards(n);
  for (int& c : cards) c = card_dist(rng);
  std::vector<FactorTable> factors;
  for (std::size_t i = 0; i < pairs; ++i) {
    VertexId a = var(rng), b = var(rng);
    while (b == a) b = var(rng);
    FactorTable t{{a, b}, std::vector<double>(static_cast<std::size_t>(cards[a] * cards[b]))};
    for (double& x : t.values) x = entry(rng);
    factors.push_back(std::move(t));
  }
  for (VertexId v = 0; v < n; ++v) {
    FactorTable t{{v}, std::vector<double>(static_cast<std::size_t>(cards[v]))};
    for (double& x : t.values) x = entry(rng);
    factors.push_back(std::move(t));
  }
  return FactorGraph(std::move(cards), std::move(factors));
}

/// Vertices of a path-shaped factor graph (as built by random_chain) in path order.
inline std::vector<VertexId> path_order(const FactorGraph& g) {
  std::vector<VertexId> order;
  VertexId start = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    if (g.degree(v) == 1) {
      start = v;
      break;
    }
  }
  std::vector<char> seen(g.num_vertices(), 0);
  VertexId cur = start;
  while (true) {
    order.push_back(cur);
    seen[cur] = 1;
    bool moved = false;
    for (VertexId u : g.neighbors(cur)) {
      if (!seen[u]) {
        cur = u;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return order;
}

/// Run plain sequential residual BP on the whole graph (no splashes) until
/// every belief residual is <= beta or `max_sweeps` round-robin sweeps pass.
inline Beliefs sweep_bp(const FactorGraph& g, double damping, double beta, int max_sweeps) {
  Shard shard = Shard::whole(g);
  for (int s = 0; s < max_sweeps && !global_convergence_test(shard, beta, ScheduleMode::belief); ++s) {
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
      for (const auto& m : update_vertex(shard, v, damping)) apply_inbound_message(shard, m.target, m.source, m.message);
    }
  }
  Beliefs out;
  for (VertexId v = 0; v < g.num_variables(); ++v) out.push_back(to_linear(shard.at(v).belief));
  return out;
}

}  // namespace dbrs::testing
