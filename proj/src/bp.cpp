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

#include "dbrs/bp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dbrs {

Vector normalize_log(const Vector& x) {
  const double top = x.maxCoeff();
  const double log_sum = std::log((x.array() - top).exp().sum());
  return (x.array() - top - log_sum).max(kLogFloor).matrix();
}

Vector uniform_log(std::size_t n) {
  return Vector::Constant(static_cast<Eigen::Index>(n), -std::log(static_cast<double>(n)));
}

Vector to_linear(const Vector& log_values) { return log_values.array().exp().matrix(); }

Vector to_log(const Vector& linear_values) {
  return linear_values.array().max(kProbabilityFloor).log().matrix();
}

double l1_distance_log(const Vector& a, const Vector& b) {
  return (a.array().exp() - b.array().exp()).abs().sum();
}

namespace {

bool is_unary_factor(const FactorGraph& g, VertexId v) {
  return g.is_factor(v) && g.degree(v) == 1;
}

Vector normalized_table(const Factor& f) { return normalize_log(f.log_table); }

std::size_t edge_slot(const FactorGraph& g, VertexId v, VertexId neighbor) {
  return g.slot_of(v, neighbor);
}

}  // namespace

// -- Shard --------------------------------------------------------------------

Shard::Shard(const FactorGraph& graph, std::span<const VertexId> owned)
    : graph_(&graph), owned_(owned.begin(), owned.end()), local_(graph.num_vertices(), -1) {
  std::sort(owned_.begin(), owned_.end());
  owned_.erase(std::unique(owned_.begin(), owned_.end()), owned_.end());
  states_.resize(owned_.size());
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    const VertexId v = owned_[i];
    if (v >= graph.num_vertices()) {
      throw ArgumentError("shard owns unknown vertex " + std::to_string(v));
    }
    local_[v] = static_cast<std::int32_t>(i);
  }
  for (std::size_t i = 0; i < owned_.size(); ++i) {
    const VertexId v = owned_[i];
    VertexState& st = states_[i];
    const auto nbrs = graph.neighbors(v);
    st.inbound.reserve(nbrs.size());
    st.outbound.reserve(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const std::size_t len = graph.message_size(v, k);
      if (graph.is_variable(v) && is_unary_factor(graph, nbrs[k])) {
        st.inbound.push_back(normalized_table(graph.factor(nbrs[k])));
      } else {
        st.inbound.push_back(uniform_log(len));
      }
      if (is_unary_factor(graph, v)) {
        st.outbound.push_back(normalized_table(graph.factor(v)));
      } else {
        st.outbound.push_back(uniform_log(len));
      }
    }
    st.belief = compute_belief(*this, v);
    st.belief_at_update = st.belief;
  }
}

Shard Shard::whole(const FactorGraph& graph) {
  std::vector<VertexId> all(graph.num_vertices());
  std::iota(all.begin(), all.end(), VertexId{0});
  return Shard(graph, all);
}

VertexState& Shard::at(VertexId v) {
  if (!owns(v)) throw StructuralError("vertex " + std::to_string(v) + " not owned by shard");
  return states_[static_cast<std::size_t>(local_[v])];
}

const VertexState& Shard::at(VertexId v) const {
  if (!owns(v)) throw StructuralError("vertex " + std::to_string(v) + " not owned by shard");
  return states_[static_cast<std::size_t>(local_[v])];
}

double Shard::residual(VertexId v, ScheduleMode mode) const {
  const VertexState& st = at(v);
  return mode == ScheduleMode::belief ? st.accumulated_residual : st.message_residual;
}

double Shard::max_residual(ScheduleMode mode) const {
  double top = 0.0;
  for (const VertexState& st : states_) {
    top = std::max(top, mode == ScheduleMode::belief ? st.accumulated_residual
                                                     : st.message_residual);
  }
  return top;
}

// -- message computation --------------------------------------------------------

Vector compute_variable_message(const Shard& shard, VertexId var, VertexId target_factor) {
  const FactorGraph& g = shard.graph();
  if (!g.is_variable(var)) {
    throw StructuralError("vertex " + std::to_string(var) + " is not a variable");
  }
  const std::size_t skip = edge_slot(g, var, target_factor);
  const VertexState& st = shard.at(var);
  Vector acc = Vector::Zero(g.cardinality(var));
  for (std::size_t k = 0; k < st.inbound.size(); ++k) {
    if (k != skip) acc += st.inbound[k];
  }
  return normalize_log(acc);
}

namespace {

// Marginalize table + inbound messages (all slots except `skip_slot`, which
// may be npos) onto scope position `target_pos`, as log values.
Vector marginalize_factor(const Factor& f, const VertexState& st, std::size_t skip_slot,
                          std::size_t target_pos) {
  const std::size_t arity = f.scope.size();
  std::vector<const Vector*> by_pos(arity, nullptr);
  for (std::size_t k = 0; k < arity; ++k) {
    if (k != skip_slot) by_pos[f.slot_to_scope[k]] = &st.inbound[k];
  }
  const std::size_t n = f.size();
  std::vector<double> terms(n);
  Vector top = Vector::Constant(f.cards[target_pos], -std::numeric_limits<double>::infinity());
  for (std::size_t idx = 0; idx < n; ++idx) {
    double t = f.log_table[static_cast<Eigen::Index>(idx)];
    for (std::size_t pos = 0; pos < arity; ++pos) {
      if (by_pos[pos] != nullptr) t += (*by_pos[pos])[f.value_at(idx, pos)];
    }
    terms[idx] = t;
    const int x = f.value_at(idx, target_pos);
    top[x] = std::max(top[x], t);
  }
  Vector sums = Vector::Zero(f.cards[target_pos]);
  for (std::size_t idx = 0; idx < n; ++idx) {
    const int x = f.value_at(idx, target_pos);
    sums[x] += std::exp(terms[idx] - top[x]);
  }
  return top.array() + sums.array().log();
}

}  // namespace

Vector compute_factor_message(const Shard& shard, VertexId factor, VertexId target_var) {
  const FactorGraph& g = shard.graph();
  const Factor& f = g.factor(factor);
  const std::size_t slot = edge_slot(g, factor, target_var);
  return normalize_log(marginalize_factor(f, shard.at(factor), slot, f.slot_to_scope[slot]));
}

Vector compute_belief(const Shard& shard, VertexId v) {
  const FactorGraph& g = shard.graph();
  const VertexState& st = shard.at(v);
  if (g.is_variable(v)) {
    Vector acc = Vector::Zero(g.cardinality(v));
    for (const Vector& m : st.inbound) acc += m;
    return normalize_log(acc);
  }
  const Factor& f = g.factor(v);
  Vector acc = f.log_table;
  for (std::size_t k = 0; k < st.inbound.size(); ++k) {
    const std::size_t pos = f.slot_to_scope[k];
    const Vector& m = st.inbound[k];
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
      acc[static_cast<Eigen::Index>(idx)] += m[f.value_at(idx, pos)];
    }
  }
  return normalize_log(acc);
}

// -- updates ------------------------------------------------------------------

std::vector<OutboundMessage> update_vertex(Shard& shard, VertexId v, double damping) {
  if (!(damping >= 0.0 && damping < 1.0)) throw ArgumentError("damping must lie in [0, 1)");
  const FactorGraph& g = shard.graph();
  VertexState& st = shard.at(v);
  const auto nbrs = g.neighbors(v);
  const std::size_t deg = nbrs.size();

  std::vector<Vector> fresh(deg);
  if (g.is_variable(v)) {
    // prefix[k] + suffix[k+1] is the sum of all inbound logs except slot k
    const Eigen::Index card = g.cardinality(v);
    std::vector<Vector> prefix(deg + 1, Vector::Zero(card));
    std::vector<Vector> suffix(deg + 1, Vector::Zero(card));
    for (std::size_t k = 0; k < deg; ++k) prefix[k + 1] = prefix[k] + st.inbound[k];
    for (std::size_t k = deg; k > 0; --k) suffix[k - 1] = suffix[k] + st.inbound[k - 1];
    for (std::size_t k = 0; k < deg; ++k) fresh[k] = normalize_log(prefix[k] + suffix[k + 1]);
  } else {
    const Factor& f = g.factor(v);
    for (std::size_t k = 0; k < deg; ++k) {
      fresh[k] = normalize_log(marginalize_factor(f, st, k, f.slot_to_scope[k]));
    }
  }

  std::vector<OutboundMessage> out;
  out.reserve(deg);
  for (std::size_t k = 0; k < deg; ++k) {
    Vector damped = damping > 0.0
                        ? normalize_log(damping * st.outbound[k] + (1.0 - damping) * fresh[k])
                        : std::move(fresh[k]);
    const double residual = l1_distance_log(damped, st.outbound[k]);
    st.outbound[k] = damped;
    out.push_back(OutboundMessage{v, nbrs[k], std::move(damped), residual});
  }

  ++st.update_count;
  st.accumulated_residual = 0.0;
  st.message_residual = 0.0;
  st.belief = compute_belief(shard, v);
  st.belief_at_update = st.belief;
  st.since_resync = 0;
  return out;
}

double apply_inbound_message(Shard& shard, VertexId dest, VertexId source, const Vector& msg) {
  const FactorGraph& g = shard.graph();
  VertexState& st = shard.at(dest);
  const std::size_t slot = edge_slot(g, dest, source);
  Vector& old = st.inbound[slot];
  if (static_cast<std::size_t>(msg.size()) != g.message_size(dest, slot)) {
    throw StructuralError("message length mismatch on edge " + std::to_string(source) + "->" +
                          std::to_string(dest));
  }
  if ((msg.array() == old.array()).all()) return 0.0;

  const double message_change = l1_distance_log(msg, old);
  const Vector previous = st.belief;
  if (g.is_variable(dest)) {
    st.belief += msg - old;
  } else {
    const Factor& f = g.factor(dest);
    const std::size_t pos = f.slot_to_scope[slot];
    for (std::size_t idx = 0; idx < f.size(); ++idx) {
      const int x = f.value_at(idx, pos);
      st.belief[static_cast<Eigen::Index>(idx)] += msg[x] - old[x];
    }
  }
  old = msg;
  if (++st.since_resync >= kBeliefResyncInterval) {
    st.belief = compute_belief(shard, dest);
    st.since_resync = 0;
  } else {
    st.belief = normalize_log(st.belief);
  }

  const double delta = l1_distance_log(st.belief, previous);
  st.accumulated_residual += delta;
  st.message_residual = std::max(st.message_residual, message_change);
  return delta;
}

double naive_belief_residual(const Shard& shard, VertexId v) {
  const VertexState& st = shard.at(v);
  if (st.update_count == 0) return kInfiniteResidual;
  return l1_distance_log(st.belief, st.belief_at_update);
}

bool global_convergence_test(const Shard& shard, double beta, ScheduleMode mode) {
  return shard.max_residual(mode) <= beta;
}

bool global_convergence_test(std::span<const Shard> shards, double beta, ScheduleMode mode) {
  return std::all_of(shards.begin(), shards.end(), [&](const Shard& s) {
    return global_convergence_test(s, beta, mode);
  });
}

}  // namespace dbrs
