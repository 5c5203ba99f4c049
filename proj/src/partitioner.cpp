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

#include "dbrs/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <string>

#include "dbrs/models.hpp"
#include "dbrs/scheduler.hpp"

namespace dbrs {

WeightedCutProblem make_cut_problem(const FactorGraph& graph, std::span<const double> update_counts,
                                    double c_comm, double gamma, std::size_t blocks) {
  if (!update_counts.empty() && update_counts.size() != graph.num_vertices()) {
    throw ArgumentError("update counts must cover every vertex");
  }
  if (!(gamma >= 1.0)) throw ArgumentError("balance coefficient gamma must be >= 1");
  if (!(c_comm >= 0.0)) throw ArgumentError("communication header cost must be nonnegative");
  auto count = [&](VertexId v) { return update_counts.empty() ? 1.0 : update_counts[v]; };

  WeightedCutProblem p;
  p.gamma = gamma;
  p.blocks = blocks;
  p.vertex_weights.resize(graph.num_vertices());
  for (VertexId v = 0; v < graph.num_vertices(); ++v) {
    // zero-count vertices keep a sliver of weight so every weight stays positive
    p.vertex_weights[v] = std::max(count(v), 1e-3) * std::max(vertex_work(graph, v), 1.0);
  }
  p.edge_weights.reserve(graph.num_edges());
  for (const auto& [var, fac] : graph.edges()) {
    const double size = static_cast<double>(graph.cardinality(var));
    p.edge_weights.push_back(std::max(count(var) + count(fac), 1e-3) * (size + c_comm));
  }
  return p;
}

std::vector<std::vector<VertexId>> Partitioning::vertices_by_worker() const {
  std::vector<std::vector<VertexId>> out(workers);
  for (VertexId v = 0; v < block_of.size(); ++v) out[worker_of(v)].push_back(v);
  return out;
}

namespace {

// Undirected weighted graph in compressed adjacency form.
struct Csr {
  std::vector<std::size_t> xadj{0};
  std::vector<std::uint32_t> adj;
  std::vector<double> ew;
  std::vector<double> vw;

  std::size_t size() const { return vw.size(); }
  double total_weight() const { return std::accumulate(vw.begin(), vw.end(), 0.0); }
};

Csr build_csr(const FactorGraph& graph, const WeightedCutProblem& problem) {
  const std::size_t n = graph.num_vertices();
  if (problem.vertex_weights.size() != n || problem.edge_weights.size() != graph.num_edges()) {
    throw ArgumentError("cut problem weights do not match the graph");
  }
  std::vector<std::vector<std::pair<std::uint32_t, double>>> lists(n);
  const auto edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = problem.edge_weights[e];
    if (!(w > 0.0)) throw ArgumentError("edge weights must be positive");
    lists[edges[e].first].emplace_back(edges[e].second, w);
    lists[edges[e].second].emplace_back(edges[e].first, w);
  }
  Csr g;
  g.vw = problem.vertex_weights;
  for (double w : g.vw) {
    if (!(w > 0.0)) throw ArgumentError("vertex weights must be positive");
  }
  for (auto& l : lists) {
    std::sort(l.begin(), l.end());
    for (const auto& [u, w] : l) {
      g.adj.push_back(u);
      g.ew.push_back(w);
    }
    g.xadj.push_back(g.adj.size());
  }
  return g;
}

// Heavy-edge matching; returns the coarse graph and fine -> coarse map.
std::pair<Csr, std::vector<std::uint32_t>> coarsen(const Csr& g, std::mt19937_64& rng,
                                                   double max_vertex_weight) {
  const std::size_t n = g.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);

  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> match(n, kNone);
  for (std::uint32_t v : order) {
    if (match[v] != kNone) continue;
    std::uint32_t best = v;
    double best_w = -1.0;
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      const std::uint32_t u = g.adj[e];
      if (match[u] != kNone || u == v) continue;
      if (g.vw[u] + g.vw[v] > max_vertex_weight) continue;
      if (g.ew[e] > best_w) {
        best_w = g.ew[e];
        best = u;
      }
    }
    match[v] = best;
    match[best] = v;
  }

  std::vector<std::uint32_t> cmap(n, kNone);
  std::uint32_t next = 0;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (cmap[v] != kNone) continue;
    cmap[v] = next;
    cmap[match[v]] = next;
    ++next;
  }

  std::vector<std::vector<std::uint32_t>> members(next);
  for (std::uint32_t v = 0; v < n; ++v) members[cmap[v]].push_back(v);

  Csr c;
  c.vw.assign(next, 0.0);
  std::vector<std::ptrdiff_t> slot(next, -1);
  for (std::uint32_t cv = 0; cv < next; ++cv) {
    const std::size_t start = c.adj.size();
    for (std::uint32_t v : members[cv]) {
      c.vw[cv] += g.vw[v];
      for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
        const std::uint32_t cu = cmap[g.adj[e]];
        if (cu == cv) continue;
        if (slot[cu] < 0) {
          slot[cu] = static_cast<std::ptrdiff_t>(c.adj.size());
          c.adj.push_back(cu);
          c.ew.push_back(g.ew[e]);
        } else {
          c.ew[static_cast<std::size_t>(slot[cu])] += g.ew[e];
        }
      }
    }
    for (std::size_t e = start; e < c.adj.size(); ++e) slot[c.adj[e]] = -1;
    c.xadj.push_back(c.adj.size());
  }
  return {std::move(c), std::move(cmap)};
}

double cut_weight(const Csr& g, const std::vector<std::uint8_t>& side) {
  double cut = 0.0;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      if (side[v] != side[g.adj[e]]) cut += g.ew[e];
    }
  }
  return cut / 2.0;
}

struct Balance {
  double limit[2];

  // how far the heavier side is over its limit (0 when feasible)
  double excess(const double weight[2]) const {
    return std::max({0.0, weight[0] - limit[0], weight[1] - limit[1]});
  }
};

// Fiduccia-Mattheyses style refinement of a bisection.
void fm_refine(const Csr& g, std::vector<std::uint8_t>& side, const Balance& bal) {
  const std::size_t n = g.size();
  std::vector<double> gain(n, 0.0);
  double weight[2] = {0.0, 0.0};
  for (std::uint32_t v = 0; v < n; ++v) weight[side[v]] += g.vw[v];
  double cut = cut_weight(g, side);

  auto compute_gain = [&](std::uint32_t v) {
    double ext = 0.0;
    double in = 0.0;
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      (side[g.adj[e]] == side[v] ? in : ext) += g.ew[e];
    }
    return ext - in;
  };

  constexpr int kMaxPasses = 8;
  constexpr std::size_t kPatience = 64;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;  // gain, vertex, version
    std::priority_queue<Entry> heap[2];
    std::vector<std::uint32_t> version(n, 0);
    std::vector<char> locked(n, 0);
    for (std::uint32_t v = 0; v < n; ++v) {
      gain[v] = compute_gain(v);
      bool boundary = false;
      for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1] && !boundary; ++e) {
        boundary = side[g.adj[e]] != side[v];
      }
      if (boundary) heap[side[v]].emplace(gain[v], v, 0);
    }

    const double start_cut = cut;
    const double start_excess = bal.excess(weight);
    double best_cut = cut;
    double best_excess = start_excess;
    std::size_t best_len = 0;
    std::vector<std::uint32_t> moves;

    auto valid_top = [&](int s) -> std::optional<Entry> {
      while (!heap[s].empty()) {
        const Entry top = heap[s].top();
        const std::uint32_t v = std::get<1>(top);
        if (locked[v] || side[v] != s || std::get<2>(top) != version[v]) {
          heap[s].pop();
          continue;
        }
        return top;
      }
      return std::nullopt;
    };

    while (moves.size() < n) {
      int pick = -1;
      double pick_gain = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < 2; ++s) {
        const auto top = valid_top(s);
        if (!top) continue;
        const std::uint32_t v = std::get<1>(*top);
        double after[2] = {weight[0], weight[1]};
        after[s] -= g.vw[v];
        after[1 - s] += g.vw[v];
        const double ex_after = bal.excess(after);
        const double ex_now = bal.excess(weight);
        if (ex_after > 0.0 && ex_after >= ex_now) continue;
        if (std::get<0>(*top) > pick_gain) {
          pick_gain = std::get<0>(*top);
          pick = s;
        }
      }
      if (pick < 0) break;
      const std::uint32_t v = std::get<1>(heap[pick].top());
      heap[pick].pop();

      side[v] = static_cast<std::uint8_t>(1 - pick);
      weight[pick] -= g.vw[v];
      weight[1 - pick] += g.vw[v];
      cut -= gain[v];
      locked[v] = 1;
      moves.push_back(v);
      for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
        const std::uint32_t u = g.adj[e];
        if (locked[u]) continue;
        // v left u's side (gain rises) or joined it (gain falls)
        gain[u] += (side[u] == pick ? 2.0 : -2.0) * g.ew[e];
        heap[side[u]].emplace(gain[u], u, ++version[u]);
      }

      const double ex = bal.excess(weight);
      const bool better = ex < best_excess - 1e-12 ||
                          (ex <= best_excess + 1e-12 && cut < best_cut - 1e-12);
      if (better) {
        best_cut = cut;
        best_excess = ex;
        best_len = moves.size();
      } else if (moves.size() - best_len > kPatience) {
        break;
      }
    }

    while (moves.size() > best_len) {
      const std::uint32_t v = moves.back();
      moves.pop_back();
      const int from = side[v];
      side[v] = static_cast<std::uint8_t>(1 - from);
      weight[from] -= g.vw[v];
      weight[1 - from] += g.vw[v];
    }
    cut = best_cut;
    if (!(best_cut < start_cut - 1e-12 || best_excess < start_excess - 1e-12)) break;
  }
}

std::uint32_t farthest_vertex(const Csr& g, std::uint32_t start) {
  std::vector<int> dist(g.size(), -1);
  std::deque<std::uint32_t> q{start};
  dist[start] = 0;
  std::uint32_t last = start;
  while (!q.empty()) {
    const std::uint32_t v = q.front();
    q.pop_front();
    last = v;
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      const std::uint32_t u = g.adj[e];
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push_back(u);
      }
    }
  }
  return last;
}

// Greedy graph growing from `seed_vertex` until side 0 holds `target` weight.
std::vector<std::uint8_t> grow_region(const Csr& g, std::uint32_t seed_vertex, double target,
                                      std::mt19937_64& rng) {
  const std::size_t n = g.size();
  std::vector<std::uint8_t> side(n, 1);
  std::vector<double> conn(n, 0.0);  // edge weight into the region
  std::vector<std::uint32_t> version(n, 0);
  using Entry = std::tuple<double, std::uint32_t, std::uint32_t>;
  std::priority_queue<Entry> frontier;
  double weight = 0.0;
  std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(n - 1));

  auto absorb = [&](std::uint32_t v) {
    side[v] = 0;
    weight += g.vw[v];
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      const std::uint32_t u = g.adj[e];
      if (side[u] == 0) continue;
      conn[u] += g.ew[e];
      double degree = 0.0;
      for (std::size_t f = g.xadj[u]; f < g.xadj[u + 1]; ++f) degree += g.ew[f];
      frontier.emplace(2.0 * conn[u] - degree, u, ++version[u]);
    }
  };

  absorb(seed_vertex);
  while (weight < target) {
    std::optional<std::uint32_t> next;
    while (!frontier.empty()) {
      const auto [gain, u, ver] = frontier.top();
      frontier.pop();
      if (side[u] == 1 && ver == version[u]) {
        next = u;
        break;
      }
    }
    if (!next) {
      // region's component exhausted: restart from an unassigned vertex
      std::uint32_t u = any(rng);
      while (side[u] == 0) u = (u + 1) % static_cast<std::uint32_t>(n);
      next = u;
    }
    if (weight + g.vw[*next] > target && weight + g.vw[*next] - target > target - weight) break;
    absorb(*next);
  }
  return side;
}

std::vector<std::uint8_t> initial_bisection(const Csr& g, double frac, const Balance& bal,
                                            std::mt19937_64& rng) {
  const std::size_t n = g.size();
  const double target = frac * g.total_weight();
  std::uniform_int_distribution<std::uint32_t> any(0, static_cast<std::uint32_t>(n - 1));
  std::vector<std::uint8_t> best;
  double best_cut = std::numeric_limits<double>::infinity();
  double best_excess = std::numeric_limits<double>::infinity();
  constexpr int kTrials = 8;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::uint32_t start = trial == 0 ? farthest_vertex(g, any(rng)) : any(rng);
    auto side = grow_region(g, start, target, rng);
    fm_refine(g, side, bal);
    double weight[2] = {0.0, 0.0};
    for (std::uint32_t v = 0; v < n; ++v) weight[side[v]] += g.vw[v];
    const double ex = bal.excess(weight);
    const double cut = cut_weight(g, side);
    if (ex < best_excess - 1e-12 || (ex <= best_excess + 1e-12 && cut < best_cut)) {
      best = std::move(side);
      best_cut = cut;
      best_excess = ex;
    }
  }
  return best;
}

std::vector<std::uint8_t> multilevel_bisect(const Csr& g, double frac, double eps,
                                            std::mt19937_64& rng) {
  constexpr std::size_t kCoarsest = 120;
  const double total = g.total_weight();
  const Balance bal{{frac * total * (1.0 + eps), (1.0 - frac) * total * (1.0 + eps)}};
  const double max_vw = std::max(1.5 * total / static_cast<double>(kCoarsest),
                                 *std::max_element(g.vw.begin(), g.vw.end()));

  std::vector<Csr> levels;
  std::vector<std::vector<std::uint32_t>> maps;
  const Csr* current = &g;
  while (current->size() > kCoarsest) {
    auto [coarse, cmap] = coarsen(*current, rng, max_vw);
    if (coarse.size() > current->size() * 95 / 100) break;
    levels.push_back(std::move(coarse));
    maps.push_back(std::move(cmap));
    current = &levels.back();
  }

  auto side = initial_bisection(*current, frac, bal, rng);
  for (std::size_t lvl = levels.size(); lvl > 0; --lvl) {
    const Csr& fine = lvl >= 2 ? levels[lvl - 2] : g;
    const auto& cmap = maps[lvl - 1];
    std::vector<std::uint8_t> projected(fine.size());
    for (std::uint32_t v = 0; v < fine.size(); ++v) projected[v] = side[cmap[v]];
    side = std::move(projected);
    fm_refine(fine, side, bal);
  }
  return side;
}

Csr induced_subgraph(const Csr& g, const std::vector<std::uint8_t>& side, std::uint8_t keep,
                     std::vector<std::uint32_t>& local_of) {
  Csr sub;
  local_of.assign(g.size(), std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    if (side[v] == keep) local_of[v] = next++;
  }
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    if (side[v] != keep) continue;
    sub.vw.push_back(g.vw[v]);
    for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      if (side[g.adj[e]] == keep) {
        sub.adj.push_back(local_of[g.adj[e]]);
        sub.ew.push_back(g.ew[e]);
      }
    }
    sub.xadj.push_back(sub.adj.size());
  }
  return sub;
}

void recursive_partition(const Csr& g, const std::vector<std::uint32_t>& ids, std::size_t m,
                         std::uint32_t first_block, double eps, std::mt19937_64& rng,
                         std::vector<std::uint32_t>& block_of) {
  if (m == 1 || g.size() <= 1) {
    for (std::uint32_t id : ids) block_of[id] = first_block;
    return;
  }
  const std::size_t left = m / 2;
  const double frac = static_cast<double>(left) / static_cast<double>(m);
  std::vector<std::uint8_t> side;
  if (g.size() <= m) {
    // one vertex per block at most: split by index
    side.assign(g.size(), 1);
    for (std::size_t i = 0; i < g.size() * left / m; ++i) side[i] = 0;
  } else {
    side = multilevel_bisect(g, frac, eps, rng);
  }
  for (std::uint8_t s = 0; s < 2; ++s) {
    std::vector<std::uint32_t> local_of;
    const Csr sub = induced_subgraph(g, side, s, local_of);
    std::vector<std::uint32_t> sub_ids;
    sub_ids.reserve(sub.size());
    for (std::uint32_t v = 0; v < g.size(); ++v) {
      if (side[v] == s) sub_ids.push_back(ids[v]);
    }
    const std::size_t sub_m = s == 0 ? left : m - left;
    const std::uint32_t sub_first = s == 0 ? first_block : first_block + static_cast<std::uint32_t>(left);
    std::mt19937_64 child(rng());
    recursive_partition(sub, sub_ids, sub_m, sub_first, eps, child, block_of);
  }
}

// Move boundary vertices out of overweight blocks into adjacent blocks with room.
void rebalance(const Csr& g, std::vector<std::uint32_t>& block_of, std::size_t m, double limit) {
  std::vector<double> load(m, 0.0);
  for (std::uint32_t v = 0; v < g.size(); ++v) load[block_of[v]] += g.vw[v];
  std::vector<double> conn(m, 0.0);
  for (int round = 0; round < 64; ++round) {
    bool moved_any = false;
    for (std::uint32_t b = 0; b < m; ++b) {
      while (load[b] > limit) {
        double best_gain = -std::numeric_limits<double>::infinity();
        std::uint32_t best_v = 0;
        std::uint32_t best_to = 0;
        for (std::uint32_t v = 0; v < g.size(); ++v) {
          if (block_of[v] != b) continue;
          double internal = 0.0;
          std::vector<std::uint32_t> touched;
          for (std::size_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
            const std::uint32_t c = block_of[g.adj[e]];
            if (c == b) {
              internal += g.ew[e];
            } else {
              if (conn[c] == 0.0) touched.push_back(c);
              conn[c] += g.ew[e];
            }
          }
          for (std::uint32_t c : touched) {
            if (load[c] + g.vw[v] <= limit && conn[c] - internal > best_gain) {
              best_gain = conn[c] - internal;
              best_v = v;
              best_to = c;
            }
          }
          for (std::uint32_t c : touched) conn[c] = 0.0;
        }
        if (best_gain == -std::numeric_limits<double>::infinity()) break;
        block_of[best_v] = best_to;
        load[b] -= g.vw[best_v];
        load[best_to] += g.vw[best_v];
        moved_any = true;
      }
    }
    if (!moved_any) break;
  }
}

}  // namespace

Partitioning partition(const FactorGraph& graph, const WeightedCutProblem& problem,
                       std::uint64_t seed) {
  const std::size_t n = graph.num_vertices();
  const std::size_t m = problem.blocks;
  if (m == 0) throw ArgumentError("block count must be positive");
  if (m > n) throw ArgumentError("more blocks requested than vertices");
  if (!(problem.gamma >= 1.0)) throw ArgumentError("balance coefficient gamma must be >= 1");

  const Csr g = build_csr(graph, problem);
  Partitioning part;
  part.block_of.assign(n, 0);
  part.worker_of_block.resize(m);
  std::iota(part.worker_of_block.begin(), part.worker_of_block.end(), 0u);
  part.workers = m;
  if (m == 1) return part;

  const double depth = std::ceil(std::log2(static_cast<double>(m)));
  const double eps = std::pow(problem.gamma, 1.0 / depth) - 1.0;
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  recursive_partition(g, ids, m, 0, eps, rng, part.block_of);

  const double limit = problem.gamma / static_cast<double>(m) * g.total_weight();
  rebalance(g, part.block_of, m, limit);
  const auto loads = block_work(problem, part);
  part.violated = std::any_of(loads.begin(), loads.end(), [&](double w) { return w > limit * (1.0 + 1e-12); });
  return part;
}

Partitioning over_partition_and_assign(const FactorGraph& graph, WeightedCutProblem problem,
                                       std::size_t workers, std::size_t k, std::uint64_t seed) {
  if (workers == 0 || k == 0) throw ArgumentError("workers and over-partition factor must be >= 1");
  problem.blocks = workers * k;
  Partitioning part = partition(graph, problem, seed);
  std::vector<std::uint32_t> order(part.blocks());
  std::iota(order.begin(), order.end(), 0u);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i) {
    part.worker_of_block[order[i]] = static_cast<std::uint32_t>(i / k);
  }
  part.workers = workers;
  return part;
}

double communication_cost(const FactorGraph& graph, const WeightedCutProblem& problem,
                          const Partitioning& part) {
  double cost = 0.0;
  const auto edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (part.worker_of(edges[e].first) != part.worker_of(edges[e].second)) {
      cost += problem.edge_weights[e];
    }
  }
  return cost;
}

std::vector<double> worker_work(const WeightedCutProblem& problem, const Partitioning& part) {
  std::vector<double> load(part.workers, 0.0);
  for (std::size_t v = 0; v < part.block_of.size(); ++v) {
    load[part.worker_of(static_cast<VertexId>(v))] += problem.vertex_weights[v];
  }
  return load;
}

std::vector<double> block_work(const WeightedCutProblem& problem, const Partitioning& part) {
  std::vector<double> load(part.blocks(), 0.0);
  for (std::size_t v = 0; v < part.block_of.size(); ++v) load[part.block_of[v]] += problem.vertex_weights[v];
  return load;
}

double work_balance(const WeightedCutProblem& problem, const Partitioning& part) {
  const auto load = worker_work(problem, part);
  const double total = std::accumulate(load.begin(), load.end(), 0.0);
  return static_cast<double>(part.workers) * *std::max_element(load.begin(), load.end()) / total;
}

RelativeMetrics relative_metrics(const FactorGraph& graph, const Partitioning& uninformed,
                                 const Partitioning& informed, std::span<const double> true_counts,
                                 double c_comm) {
  const WeightedCutProblem truth = make_cut_problem(graph, true_counts, c_comm);
  const double informed_cost = communication_cost(graph, truth, informed);
  if (informed_cost == 0.0) throw ArgumentError("informed cut has zero cost; ratio undefined");
  return RelativeMetrics{communication_cost(graph, truth, uninformed) / informed_cost,
                         work_balance(truth, uninformed)};
}

std::uint64_t sanders_k(std::size_t workers, double sigma) {
  if (!(sigma > 0.0 && sigma <= 0.5)) throw ArgumentError("sigma must lie in (0, 1/2]");
  if (workers == 0) throw ArgumentError("worker count must be positive");
  const double denom = std::log2(1.0 / (sigma + 0.5));
  if (denom <= 0.0) return kSandersCap;
  // a relative slack of 1e-6 lets the sigma -> 0 limit land on k = p
  const double raw = std::pow(static_cast<double>(workers), 1.0 / denom);
  const double k = std::ceil(raw * (1.0 - 1e-6));
  if (!std::isfinite(k) || k >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
}

// -- files --------------------------------------------------------------------

void write_partitioning(const Partitioning& part, std::ostream& out) {
  out << "DBRSPART 1 " << part.block_of.size() << ' ' << part.blocks() << ' ' << part.workers << '\n';
  for (std::size_t v = 0; v < part.block_of.size(); ++v) {
    out << v << ' ' << part.block_of[v] << ' ' << part.worker_of(static_cast<VertexId>(v)) << '\n';
  }
}

Partitioning read_partitioning(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing partition header", line_no);
  std::istringstream header(line);
  std::string magic;
  int version = 0;
  std::size_t n = 0, m = 0, p = 0;
  if (!(header >> magic >> version >> n >> m >> p) || magic != "DBRSPART" || version != 1) {
    throw ParseError("expected 'DBRSPART 1 <n_vertices> <m_blocks> <p_workers>'", line_no);
  }
  if (m == 0 || p == 0) throw ParseError("block and worker counts must be positive", line_no);
  Partitioning part;
  part.workers = p;
  part.block_of.assign(n, std::numeric_limits<std::uint32_t>::max());
  part.worker_of_block.assign(m, std::numeric_limits<std::uint32_t>::max());
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::size_t v = 0, b = 0, w = 0;
    if (!(row >> v >> b >> w)) throw ParseError("expected '<vertex_id> <block_id> <worker_id>'", line_no);
    if (v >= n || b >= m || w >= p) throw ParseError("partition entry out of range", line_no);
    if (part.block_of[v] != std::numeric_limits<std::uint32_t>::max()) {
      throw ParseError("vertex " + std::to_string(v) + " assigned twice", line_no);
    }
    auto& owner = part.worker_of_block[b];
    if (owner != std::numeric_limits<std::uint32_t>::max() && owner != w) {
      throw ParseError("block " + std::to_string(b) + " mapped to two workers", line_no);
    }
    owner = static_cast<std::uint32_t>(w);
    part.block_of[v] = static_cast<std::uint32_t>(b);
    ++seen;
  }
  if (seen != n) throw ParseError("partition lists " + std::to_string(seen) + " of " + std::to_string(n) + " vertices", line_no);
  for (auto& owner : part.worker_of_block) {
    if (owner == std::numeric_limits<std::uint32_t>::max()) owner = 0;  // empty block
  }
  return part;
}

void save_partitioning(const Partitioning& part, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_partitioning(part, out);
}

Partitioning load_partitioning(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_partitioning(in);
}

void write_update_counts(std::span<const std::uint64_t> counts, std::ostream& out) {
  for (std::size_t v = 0; v < counts.size(); ++v) out << v << ' ' << counts[v] << '\n';
}

std::vector<double> read_update_counts(std::istream& in, std::size_t num_vertices) {
  std::vector<double> counts(num_vertices, -1.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    std::size_t v = 0;
    double u = 0.0;
    if (!(row >> v >> u)) throw ParseError("expected '<vertex_id> <U_i>'", line_no);
    if (v >= num_vertices) throw ParseError("vertex id out of range", line_no);
    if (!(u >= 0.0)) throw ParseError("update count must be nonnegative", line_no);
    counts[v] = u;
  }
  for (std::size_t v = 0; v < num_vertices; ++v) {
    if (counts[v] < 0.0) throw ParseError("missing update count for vertex " + std::to_string(v), line_no);
  }
  return counts;
}

std::vector<double> load_update_counts(const std::filesystem::path& path, std::size_t num_vertices) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_update_counts(in, num_vertices);
}

}  // namespace dbrs
