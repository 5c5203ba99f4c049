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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dbrs {

using VertexId = std::uint32_t;
using Vector = Eigen::VectorXd;

/// Graph and state disagree about an edge or a vertex kind.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Oracle or partitioner asked to exceed a documented capacity limit.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smallest linear-space value a stored message or belief entry may take.
inline constexpr double kProbabilityFloor = 1e-300;
/// log(kProbabilityFloor).
inline constexpr double kLogFloor = -690.77552789821368;

/// Input description of one factor: scope plus a linear-space table with the
/// last scope variable varying fastest.
struct FactorTable {
  std::vector<VertexId> scope;
  std::vector<double> values;
};

struct Factor {
  std::vector<VertexId> scope;
  std::vector<int> cards;
  /// stride of each scope position in the flattened table
  std::vector<std::size_t> strides;
  std::vector<double> table;
  Vector log_table;
  /// scope position of each neighbor slot (neighbors are sorted by id)
  std::vector<std::size_t> slot_to_scope;

  std::size_t size() const { return table.size(); }
  /// Value of scope position `pos` inside flattened index `index`.
  int value_at(std::size_t index, std::size_t pos) const {
    return static_cast<int>((index / strides[pos]) % static_cast<std::size_t>(cards[pos]));
  }
};

/**
 * Immutable bipartite factor graph over discrete variables.
 *
 * Vertex ids are unified: variables occupy [0, num_variables()) and factor f
 * is vertex num_variables() + f.  Neighbor lists are sorted by vertex id and
 * every product or sum over neighbors iterates in that order.
 */
class FactorGraph {
 public:
  FactorGraph() = default;
  FactorGraph(std::vector<int> cardinalities, std::vector<FactorTable> factors);

  std::size_t num_variables() const { return cards_.size(); }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t num_vertices() const { return adjacency_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  bool is_variable(VertexId v) const { return v < cards_.size(); }
  bool is_factor(VertexId v) const { return v >= cards_.size() && v < adjacency_.size(); }
  VertexId factor_vertex(std::size_t f) const { return static_cast<VertexId>(cards_.size() + f); }

  int cardinality(VertexId var) const { return cards_.at(var); }
  std::span<const int> cardinalities() const { return cards_; }

  const Factor& factor(VertexId v) const;
  const Factor& factor_at(std::size_t f) const { return factors_.at(f); }

  std::span<const VertexId> neighbors(VertexId v) const { return adjacency_.at(v); }
  std::size_t degree(VertexId v) const { return adjacency_.at(v).size(); }

  /// Position of `neighbor` in neighbors(v); throws StructuralError if absent.
  std::size_t slot_of(VertexId v, VertexId neighbor) const;
  /// Position of v inside neighbors(neighbors(v)[slot]).
  std::size_t reverse_slot(VertexId v, std::size_t slot) const { return reverse_[v][slot]; }

  /// Length of a message on an edge incident to v through `slot`.
  std::size_t message_size(VertexId v, std::size_t slot) const;
  /// Variables: cardinality.  Factors: joint table size.
  std::size_t belief_size(VertexId v) const;

  /// Undirected edges as (variable, factor) pairs, ordered by factor then scope position.
  std::span<const std::pair<VertexId, VertexId>> edges() const { return edges_; }

  friend bool operator==(const FactorGraph& a, const FactorGraph& b);

 private:
  std::vector<int> cards_;
  std::vector<Factor> factors_;
  std::vector<std::vector<VertexId>> adjacency_;
  std::vector<std::vector<std::size_t>> reverse_;
  std::vector<std::pair<VertexId, VertexId>> edges_;
};

}  // namespace dbrs
