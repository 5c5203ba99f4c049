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
#include <limits>
#include <span>
#include <vector>

#include "dbrs/graph.hpp"

namespace dbrs {

inline constexpr double kInfiniteResidual = std::numeric_limits<double>::infinity();
/// Incremental belief updates between from-scratch recomputations.
inline constexpr std::uint32_t kBeliefResyncInterval = 256;

enum class ScheduleMode { belief, message };

// -- log-space vector helpers ------------------------------------------------

/// Shift so that exp(x) sums to one, then clamp entries at kLogFloor.
Vector normalize_log(const Vector& x);
Vector uniform_log(std::size_t n);
Vector to_linear(const Vector& log_values);
Vector to_log(const Vector& linear_values);
/// L1 distance between two log-space distributions, measured in linear space.
double l1_distance_log(const Vector& a, const Vector& b);

/// State a worker keeps for one vertex it owns.
struct VertexState {
  /// log-space message from neighbors(v)[slot], the locality-resident copy
  std::vector<Vector> inbound;
  /// last message v sent to neighbors(v)[slot]
  std::vector<Vector> outbound;
  /// log-space normalized belief
  Vector belief;
  /// belief when v was last updated (naive residual bookkeeping)
  Vector belief_at_update;
  double accumulated_residual = kInfiniteResidual;
  double message_residual = kInfiniteResidual;
  std::uint64_t update_count = 0;
  std::uint32_t since_resync = 0;
};

/**
 * Mutable inference state for a subset of vertices.
 *
 * A shard holds the inbound messages of every vertex it owns, so vertex
 * updates never read another shard.  Messages start uniform except those
 * leaving single-variable factors, which are constant and start at the
 * normalized table.
 */
class Shard {
 public:
  Shard(const FactorGraph& graph, std::span<const VertexId> owned);
  static Shard whole(const FactorGraph& graph);

  const FactorGraph& graph() const { return *graph_; }
  std::span<const VertexId> owned() const { return owned_; }
  bool owns(VertexId v) const { return v < local_.size() && local_[v] >= 0; }

  VertexState& at(VertexId v);
  const VertexState& at(VertexId v) const;

  double residual(VertexId v, ScheduleMode mode) const;
  double max_residual(ScheduleMode mode) const;

 private:
  const FactorGraph* graph_;
  std::vector<VertexId> owned_;
  std::vector<std::int32_t> local_;
  std::vector<VertexState> states_;
};

struct OutboundMessage {
  VertexId source;
  VertexId target;
  Vector message;
  /// L1 change versus the previous message on this edge
  double residual;
};

Vector compute_variable_message(const Shard& shard, VertexId var, VertexId target_factor);
Vector compute_factor_message(const Shard& shard, VertexId factor, VertexId target_var);
Vector compute_belief(const Shard& shard, VertexId v);

/// Recompute every outbound message of v with damping weight `damping` on the
/// old message, reset v's residuals and refresh its belief.
std::vector<OutboundMessage> update_vertex(Shard& shard, VertexId v, double damping);

/// Store a new inbound message on edge (source, dest), update dest's belief
/// incrementally and accumulate the belief change.  Returns that change.
double apply_inbound_message(Shard& shard, VertexId dest, VertexId source, const Vector& msg);

/// Belief change since the last update of v.
double naive_belief_residual(const Shard& shard, VertexId v);

bool global_convergence_test(const Shard& shard, double beta, ScheduleMode mode);
bool global_convergence_test(std::span<const Shard> shards, double beta, ScheduleMode mode);

}  // namespace dbrs
