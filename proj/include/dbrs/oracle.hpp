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
#include <optional>
#include <span>
#include <vector>

#include "dbrs/graph.hpp"

namespace dbrs {

/// Linear-space marginal per variable.
using Beliefs = std::vector<Vector>;

inline constexpr std::uint64_t kMaxEnumerationStates = std::uint64_t{1} << 25;
inline constexpr std::size_t kMaxInducedWidth = 12;
inline constexpr std::uint64_t kMaxCliqueEntries = std::uint64_t{1} << 25;

/// Brute force over the joint state space.  Throws CapacityError above 2^25 states.
Beliefs enumerate_marginals(const FactorGraph& graph);

/// Min-degree elimination order over the variable interaction graph.
std::vector<VertexId> min_degree_order(const FactorGraph& graph);

/// Clique-tree calibration built from an elimination order (min-degree when
/// `order` is empty).  Throws CapacityError when the induced width exceeds 12
/// or a clique table exceeds 2^25 entries.
Beliefs eliminate_marginals(const FactorGraph& graph, std::span<const VertexId> order = {});

/// Enumeration when the joint space is small, otherwise elimination along
/// the cheaper of min-degree and variable-id order.
Beliefs exact_marginals(const FactorGraph& graph);

/// Single-site Gibbs sampler sweeping variables in id order.  `samples`
/// counts sweeps including the first `burn_in`, which are discarded.
Beliefs gibbs_marginals(const FactorGraph& graph, std::uint64_t samples, std::uint64_t burn_in,
                        std::uint64_t seed);

/// Mean over variables of the L1 distance between marginals.
double accuracy(const Beliefs& a, const Beliefs& b);
/// Per-variable L1 distances.
std::vector<double> per_variable_l1(const Beliefs& a, const Beliefs& b);

// Beliefs file: one line per variable, `<var_id> <p_0> ... <p_{A-1}>`.
void write_beliefs(const Beliefs& beliefs, std::ostream& out);
Beliefs read_beliefs(std::istream& in);
void save_beliefs(const Beliefs& beliefs, const std::filesystem::path& path);
Beliefs load_beliefs(const std::filesystem::path& path);

}  // namespace dbrs
