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

#include "dbrs/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <string>

namespace dbrs {

PriorityQueue::PriorityQueue(std::size_t num_vertices)
    : priority_(num_vertices, 0.0), present_(num_vertices, 0) {}

void PriorityQueue::push(VertexId v, double priority) {
  if (v >= priority_.size()) throw ArgumentError("queue vertex out of range");
  if (present_[v]) entries_.erase({priority_[v], v});
  priority_[v] = priority;
  present_[v] = 1;
  entries_.insert({priority, v});
}

void PriorityQueue::promote(VertexId v, double priority) {
  if (v >= priority_.size()) throw ArgumentError("queue vertex out of range");
  if (present_[v] && priority_[v] >= priority) return;
  push(v, priority);
}

void PriorityQueue::remove(VertexId v) {
  if (v >= priority_.size() || !present_[v]) return;
  entries_.erase({priority_[v], v});
  present_[v] = 0;
}

std::optional<VertexId> PriorityQueue::pop() {
  if (entries_.empty()) return std::nullopt;
  const VertexId v = entries_.begin()->second;
  entries_.erase(entries_.begin());
  present_[v] = 0;
  return v;
}

std::optional<std::pair<VertexId, double>> PriorityQueue::top() const {
  if (entries_.empty()) return std::nullopt;
  return std::make_pair(entries_.begin()->second, entries_.begin()->first);
}

double PriorityQueue::top_priority() const {
  return entries_.empty() ? 0.0 : entries_.begin()->first;
}

bool PriorityQueue::contains(VertexId v) const { return v < present_.size() && present_[v]; }

double PriorityQueue::priority(VertexId v) const {
  if (!contains(v)) throw ArgumentError("vertex " + std::to_string(v) + " not queued");
  return priority_[v];
}

double vertex_work(const FactorGraph& graph, VertexId v) {
  const double degree = static_cast<double>(graph.degree(v));
  return degree * static_cast<double>(graph.belief_size(v));
}

SplashPlan build_splash(const Shard& shard, VertexId root, double w_max, double beta,
                        ScheduleMode mode) {
  if (!(w_max > 0.0)) throw ArgumentError("splash work bound must be positive");
  const FactorGraph& g = shard.graph();
  if (!shard.owns(root)) throw StructuralError("splash root not owned by shard");

  SplashPlan plan;
  plan.root = root;
  plan.planned_work = vertex_work(g, root);
  plan.bfs_order.push_back(root);

  std::vector<char> visited(g.num_vertices(), 0);
  visited[root] = 1;
  std::deque<VertexId> frontier{root};
  while (!frontier.empty()) {
    const VertexId u = frontier.front();
    frontier.pop_front();
    for (VertexId nb : g.neighbors(u)) {
      if (visited[nb] || !shard.owns(nb)) continue;
      visited[nb] = 1;
      if (shard.residual(nb, mode) < beta) continue;
      const double w = vertex_work(g, nb);
      if (plan.planned_work + w > w_max) {
        plan.truncated_by_work = true;
        continue;
      }
      plan.planned_work += w;
      plan.bfs_order.push_back(nb);
      frontier.push_back(nb);
    }
  }

  plan.update_sequence.assign(plan.bfs_order.rbegin(), plan.bfs_order.rend());
  plan.update_sequence.insert(plan.update_sequence.end(), plan.bfs_order.begin() + 1,
                              plan.bfs_order.end());
  return plan;
}

SplashStats execute_splash(Shard& shard, const SplashPlan& plan, double damping,
                           const ExternalSink& sink) {
  const FactorGraph& g = shard.graph();
  SplashStats stats;
  stats.work = plan.planned_work;
  for (VertexId v : plan.update_sequence) {
    auto outbound = update_vertex(shard, v, damping);
    ++stats.updates;
    stats.edge_updates += g.degree(v);
    for (const OutboundMessage& m : outbound) {
      ++stats.messages;
      if (shard.owns(m.target)) {
        const double delta = apply_inbound_message(shard, m.target, m.source, m.message);
        if (delta > 0.0) stats.changed.emplace_back(m.target, delta);
      } else {
        ++stats.external_messages;
        sink(m);
      }
    }
  }
  return stats;
}

void promote_and_reschedule(PriorityQueue& queue, const Shard& shard,
                            std::span<const std::pair<VertexId, double>> changed,
                            std::span<const VertexId> updated, ScheduleMode mode) {
  for (VertexId v : updated) queue.push(v, shard.residual(v, mode));
  for (const auto& [v, delta] : changed) {
    if (delta > 0.0) queue.promote(v, shard.residual(v, mode));
  }
}

double default_splash_work(const FactorGraph& graph, std::size_t workers) {
  double total = 0.0;
  double largest = 0.0;
  for (VertexId v = 0; v < graph.num_vertices(); ++v) {
    const double w = vertex_work(graph, v);
    total += w;
    largest = std::max(largest, w);
  }
  const double share = 2.0 * total / static_cast<double>(std::max<std::size_t>(workers, 1));
  return std::max({share, largest, 1.0});
}

}  // namespace dbrs
