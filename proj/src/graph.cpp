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

#include "dbrs/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dbrs {

FactorGraph::FactorGraph(std::vector<int> cardinalities, std::vector<FactorTable> factors)
    : cards_(std::move(cardinalities)) {
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    if (cards_[i] < 1) {
      throw ArgumentError("variable " + std::to_string(i) + " has nonpositive cardinality");
    }
  }
  const std::size_t n_vars = cards_.size();
  adjacency_.assign(n_vars + factors.size(), {});
  factors_.reserve(factors.size());

  for (std::size_t f = 0; f < factors.size(); ++f) {
    FactorTable& spec = factors[f];
    const std::string tag = "factor " + std::to_string(f);
    if (spec.scope.empty()) throw ArgumentError(tag + " has an empty scope");

    Factor out;
    out.scope = std::move(spec.scope);
    std::size_t size = 1;
    for (VertexId var : out.scope) {
      if (var >= n_vars) {
        throw ArgumentError(tag + " references unknown variable " + std::to_string(var));
      }
      out.cards.push_back(cards_[var]);
      size *= static_cast<std::size_t>(cards_[var]);
    }
    std::vector<VertexId> sorted = out.scope;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ArgumentError(tag + " repeats a variable in its scope");
    }
    if (spec.values.size() != size) {
      throw ArgumentError(tag + " table has " + std::to_string(spec.values.size()) +
                          " entries, expected " + std::to_string(size));
    }
    out.strides.assign(out.scope.size(), 1);
    for (std::size_t pos = out.scope.size() - 1; pos > 0; --pos) {
      out.strides[pos - 1] = out.strides[pos] * static_cast<std::size_t>(out.cards[pos]);
    }
    out.log_table.resize(static_cast<Eigen::Index>(size));
    for (std::size_t i = 0; i < size; ++i) {
      const double x = spec.values[i];
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ArgumentError(tag + " table entry " + std::to_string(i) +
                            " is not a finite positive value");
      }
      out.log_table[static_cast<Eigen::Index>(i)] = std::log(x);
    }
    out.table = std::move(spec.values);

    const VertexId fv = static_cast<VertexId>(n_vars + f);
    adjacency_[fv] = sorted;
    out.slot_to_scope.reserve(sorted.size());
    for (VertexId var : sorted) {
      const auto it = std::find(out.scope.begin(), out.scope.end(), var);
      out.slot_to_scope.push_back(static_cast<std::size_t>(it - out.scope.begin()));
      adjacency_[var].push_back(fv);
    }
    for (VertexId var : out.scope) edges_.emplace_back(var, fv);
    factors_.push_back(std::move(out));
  }

  // Factor ids grow with f, so variable adjacency is already sorted.
  reverse_.resize(adjacency_.size());
  for (VertexId v = 0; v < adjacency_.size(); ++v) {
    reverse_[v].reserve(adjacency_[v].size());
    for (VertexId u : adjacency_[v]) {
      const auto& back = adjacency_[u];
      const auto it = std::lower_bound(back.begin(), back.end(), v);
      reverse_[v].push_back(static_cast<std::size_t>(it - back.begin()));
    }
  }
}

const Factor& FactorGraph::factor(VertexId v) const {
  if (!is_factor(v)) throw StructuralError("vertex " + std::to_string(v) + " is not a factor");
  return factors_[v - cards_.size()];
}

std::size_t FactorGraph::slot_of(VertexId v, VertexId neighbor) const {
  if (v >= adjacency_.size()) throw StructuralError("unknown vertex " + std::to_string(v));
  const auto& adj = adjacency_[v];
  const auto it = std::lower_bound(adj.begin(), adj.end(), neighbor);
  if (it == adj.end() || *it != neighbor) {
    throw StructuralError("no edge between " + std::to_string(v) + " and " +
                          std::to_string(neighbor));
  }
  return static_cast<std::size_t>(it - adj.begin());
}

std::size_t FactorGraph::message_size(VertexId v, std::size_t slot) const {
  const VertexId var = is_variable(v) ? v : adjacency_[v][slot];
  return static_cast<std::size_t>(cards_[var]);
}

std::size_t FactorGraph::belief_size(VertexId v) const {
  return is_variable(v) ? static_cast<std::size_t>(cards_[v]) : factor(v).size();
}

bool operator==(const FactorGraph& a, const FactorGraph& b) {
  if (a.cards_ != b.cards_ || a.factors_.size() != b.factors_.size()) return false;
  for (std::size_t f = 0; f < a.factors_.size(); ++f) {
    if (a.factors_[f].scope != b.factors_[f].scope) return false;
    if (a.factors_[f].table != b.factors_[f].table) return false;
  }
  return true;
}

}  // namespace dbrs
