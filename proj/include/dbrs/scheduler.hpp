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
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "dbrs/bp.hpp"
#include "dbrs/graph.hpp"

namespace dbrs {

/// Max-priority queue over vertex ids; equal priorities pop smallest id first.
class PriorityQueue {
 public:
  explicit PriorityQueue(std::size_t num_vertices);

  /// Insert v or overwrite its priority.
  void push(VertexId v, double priority);
  /// Raise v's priority (inserting if absent); never lowers it.
  void promote(VertexId v, double priority);
  void remove(VertexId v);
  std::optional<VertexId> pop();

  std::optional<std::pair<VertexId, double>> top() const;
  double top_priority() const;  // 0 when empty
  bool contains(VertexId v) const;
  double priority(VertexId v) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  struct Order {
    bool operator()(const std::pair<double, VertexId>& a,
                    const std::pair<double, VertexId>& b) const {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    }
  };
  std::set<std::pair<double, VertexId>, Order> entries_;
  std::vector<double> priority_;
  std::vector<char> present_;
};

/// Per-update cost of v: degree times message or table size.
double vertex_work(const FactorGraph& graph, VertexId v);

struct SplashPlan {
  VertexId root = 0;
  std::vector<VertexId> bfs_order;
  /// reverse(bfs_order) followed by bfs_order without the root
  std::vector<VertexId> update_sequence;
  double planned_work = 0.0;
  /// some candidate vertex was left out only because of the work bound
  bool truncated_by_work = false;
};

/// Work-bounded BFS over vertices the shard owns.  Non-root vertices whose
/// scheduling residual is below beta are pruned; neighbors are visited in
/// ascending id order.
SplashPlan build_splash(const Shard& shard, VertexId root, double w_max, double beta,
                        ScheduleMode mode);

struct SplashStats {
  std::uint64_t updates = 0;
  std::uint64_t messages = 0;
  std::uint64_t external_messages = 0;
  std::uint64_t edge_updates = 0;
  double work = 0.0;
  /// local vertices whose belief moved, with the size of each move
  std::vector<std::pair<VertexId, double>> changed;
};

/// Receives messages whose destination lives on another worker.
using ExternalSink = std::function<void(const OutboundMessage&)>;

SplashStats execute_splash(Shard& shard, const SplashPlan& plan, double damping,
                           const ExternalSink& sink);

/// Bring queue priorities back in line with the shard's residuals: vertices
/// updated by the splash are re-pushed with their current residual (the root
/// included) and every changed vertex is promoted.
void promote_and_reschedule(PriorityQueue& queue, const Shard& shard,
                            std::span<const std::pair<VertexId, double>> changed,
                            std::span<const VertexId> updated, ScheduleMode mode);

/// max(2 * total_work / workers, largest single vertex work)
double default_splash_work(const FactorGraph& graph, std::size_t workers);

}  // namespace dbrs
