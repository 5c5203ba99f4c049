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

#include "dbrs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dbrs/models.hpp"

namespace dbrs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector normalized_from_logs(const Vector& logs) {
  const double top = logs.maxCoeff();
  Vector p = (logs.array() - top).exp().matrix();
  return p / p.sum();
}

// Log-space table over a sorted variable list, last variable fastest.
struct LogTable {
  std::vector<VertexId> vars;
  std::vector<int> cards;
  std::vector<double> values;

  std::size_t stride_of(VertexId v) const {
    std::size_t stride = 1;
    for (std::size_t pos = vars.size(); pos > 0; --pos) {
      if (vars[pos - 1] == v) return stride;
      stride *= static_cast<std::size_t>(cards[pos - 1]);
    }
    return 0;
  }
};

LogTable from_factor(const Factor& f) {
  std::vector<std::size_t> perm(f.scope.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return f.scope[a] < f.scope[b];
  });
  LogTable t;
  for (std::size_t p : perm) {
    t.vars.push_back(f.scope[p]);
    t.cards.push_back(f.cards[p]);
  }
  t.values.assign(f.size(), 0.0);
  for (std::size_t idx = 0; idx < f.size(); ++idx) {
    std::size_t out = 0;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      out = out * static_cast<std::size_t>(t.cards[k]) + static_cast<std::size_t>(f.value_at(idx, perm[k]));
    }
    t.values[out] = f.log_table[static_cast<Eigen::Index>(idx)];
  }
  return t;
}

std::uint64_t table_entries(const std::vector<VertexId>& vars, const FactorGraph& g) {
  std::uint64_t n = 1;
  for (VertexId v : vars) {
    n *= static_cast<std::uint64_t>(g.cardinality(v));
    if (n > kMaxCliqueEntries) return n;
  }
  return n;
}

// Product of `inputs` over the sorted union scope `vars`.
LogTable product(const std::vector<const LogTable*>& inputs, const std::vector<VertexId>& vars,
                 const FactorGraph& g) {
  LogTable out;
  out.vars = vars;
  std::size_t total = 1;
  for (VertexId v : vars) {
    out.cards.push_back(g.cardinality(v));
    total *= static_cast<std::size_t>(g.cardinality(v));
  }
  out.values.assign(total, 0.0);
  const std::size_t k = vars.size();
  std::vector<std::vector<std::size_t>> strides(inputs.size(), std::vector<std::size_t>(k));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t pos = 0; pos < k; ++pos) strides[i][pos] = inputs[i]->stride_of(vars[pos]);
  }
  std::vector<int> digit(k, 0);
  std::vector<std::size_t> idx(inputs.size(), 0);
  for (std::size_t u = 0; u < total; ++u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) acc += inputs[i]->values[idx[i]];
    out.values[u] = acc;
    for (std::size_t pos = k; pos > 0; --pos) {
      const std::size_t p = pos - 1;
      ++digit[p];
      for (std::size_t i = 0; i < inputs.size(); ++i) idx[i] += strides[i][p];
      if (digit[p] < out.cards[p]) break;
      for (std::size_t i = 0; i < inputs.size(); ++i) idx[i] -= strides[i][p] * static_cast<std::size_t>(out.cards[p]);
      digit[p] = 0;
    }
  }
  return out;
}

// log-sum-exp of `in` onto the sorted subset `keep`.
LogTable marginalize(const LogTable& in, const std::vector<VertexId>& keep) {
  LogTable out;
  out.vars = keep;
  std::size_t total = 1;
  for (VertexId v : keep) {
    const auto it = std::find(in.vars.begin(), in.vars.end(), v);
    out.cards.push_back(in.cards[static_cast<std::size_t>(it - in.vars.begin())]);
    total *= static_cast<std::size_t>(out.cards.back());
  }
  const std::size_t k = in.vars.size();
  std::vector<std::size_t> stride(k);
  for (std::size_t pos = 0; pos < k; ++pos) stride[pos] = out.stride_of(in.vars[pos]);

  std::vector<double> top(total, kNegInf);
  auto sweep = [&](auto&& visit) {
    std::vector<int> digit(k, 0);
    std::size_t o = 0;
    for (std::size_t u = 0; u < in.values.size(); ++u) {
      visit(o, in.values[u]);
      for (std::size_t pos = k; pos > 0; --pos) {
        const std::size_t p = pos - 1;
        ++digit[p];
        o += stride[p];
        if (digit[p] < in.cards[p]) break;
        o -= stride[p] * static_cast<std::size_t>(in.cards[p]);
        digit[p] = 0;
      }
    }
  };
  sweep([&](std::size_t o, double x) { top[o] = std::max(top[o], x); });
  std::vector<double> sum(total, 0.0);
  sweep([&](std::size_t o, double x) { sum[o] += std::exp(x - top[o]); });
  out.values.resize(total);
  for (std::size_t o = 0; o < total; ++o) out.values[o] = top[o] + std::log(sum[o]);
  // keep magnitudes bounded; marginals are normalized at the end anyway
  const double shift = *std::max_element(out.values.begin(), out.values.end());
  for (double& x : out.values) x -= shift;
  return out;
}

std::vector<VertexId> union_scope(const std::vector<const LogTable*>& inputs) {
  std::set<VertexId> s;
  for (const LogTable* t : inputs) s.insert(t->vars.begin(), t->vars.end());
  return {s.begin(), s.end()};
}

}  // namespace

Beliefs enumerate_marginals(const FactorGraph& graph) {
  const std::size_t n = graph.num_variables();
  std::uint64_t states = 1;
  for (std::size_t v = 0; v < n; ++v) {
    states *= static_cast<std::uint64_t>(graph.cardinality(static_cast<VertexId>(v)));
    if (states > kMaxEnumerationStates) {
      throw CapacityError("joint state space exceeds 2^25 assignments");
    }
  }
  std::vector<int> x(n, 0);
  auto log_weight = [&]() {
    double acc = 0.0;
    for (std::size_t f = 0; f < graph.num_factors(); ++f) {
      const Factor& fac = graph.factor_at(f);
      std::size_t idx = 0;
      for (std::size_t pos = 0; pos < fac.scope.size(); ++pos) {
        idx += fac.strides[pos] * static_cast<std::size_t>(x[fac.scope[pos]]);
      }
      acc += fac.log_table[static_cast<Eigen::Index>(idx)];
    }
    return acc;
  };
  auto advance = [&]() {
    for (std::size_t v = n; v > 0; --v) {
      if (++x[v - 1] < graph.cardinality(static_cast<VertexId>(v - 1))) return;
      x[v - 1] = 0;
    }
  };

  double top = kNegInf;
  for (std::uint64_t s = 0; s < states; ++s, advance()) top = std::max(top, log_weight());
  Beliefs out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = Vector::Zero(graph.cardinality(static_cast<VertexId>(v)));
  std::fill(x.begin(), x.end(), 0);
  for (std::uint64_t s = 0; s < states; ++s, advance()) {
    const double w = std::exp(log_weight() - top);
    for (std::size_t v = 0; v < n; ++v) out[v][x[v]] += w;
  }
  for (Vector& b : out) b /= b.sum();
  return out;
}

std::vector<VertexId> min_degree_order(const FactorGraph& graph) {
  const std::size_t n = graph.num_variables();
  std::vector<std::set<VertexId>> adj(n);
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& scope = graph.factor_at(f).scope;
    for (VertexId a : scope) {
      for (VertexId b : scope) {
        if (a != b) adj[a].insert(b);
      }
    }
  }
  std::vector<char> done(n, 0);
  std::vector<VertexId> order;
  order.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    VertexId best = 0;
    std::size_t best_deg = std::numeric_limits<std::size_t>::max();
    for (VertexId v = 0; v < n; ++v) {
      if (!done[v] && adj[v].size() < best_deg) {
        best = v;
        best_deg = adj[v].size();
      }
    }
    done[best] = 1;
    order.push_back(best);
    const std::vector<VertexId> nbrs(adj[best].begin(), adj[best].end());
    for (VertexId a : nbrs) {
      adj[a].erase(best);
      for (VertexId b : nbrs) {
        if (a != b) adj[a].insert(b);
      }
    }
    adj[best].clear();
  }
  return order;
}

namespace {

// Symbolic elimination over the interaction graph, so capacity errors surface
// before any table is built.
struct EliminationCost {
  std::size_t width = 0;
  // saturates just above kMaxCliqueEntries
  std::uint64_t max_entries = 0;
};

EliminationCost elimination_cost(const FactorGraph& graph, const std::vector<VertexId>& order) {
  std::vector<std::set<VertexId>> adj(graph.num_variables());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const auto& scope = graph.factor_at(f).scope;
    for (VertexId a : scope) {
      for (VertexId b : scope) {
        if (a != b) adj[a].insert(b);
      }
    }
  }
  EliminationCost cost;
  for (VertexId var : order) {
    std::vector<VertexId> clique(adj[var].begin(), adj[var].end());
    cost.width = std::max(cost.width, clique.size());
    // past the caps the order is rejected anyway; stop before the fill-in blows up
    if (cost.width > kMaxInducedWidth) return cost;
    clique.push_back(var);
    cost.max_entries = std::max(cost.max_entries, table_entries(clique, graph));
    clique.pop_back();
    for (VertexId a : clique) {
      adj[a].erase(var);
      for (VertexId b : clique) {
        if (a != b) adj[a].insert(b);
      }
    }
    adj[var].clear();
  }
  return cost;
}

bool within_caps(const EliminationCost& c) {
  return c.width <= kMaxInducedWidth && c.max_entries <= kMaxCliqueEntries;
}

void check_elimination_capacity(const FactorGraph& graph, const std::vector<VertexId>& order) {
  const EliminationCost c = elimination_cost(graph, order);
  if (c.width > kMaxInducedWidth) {
    throw CapacityError("induced width " + std::to_string(c.width) + " exceeds the elimination cap of 12");
  }
  if (c.max_entries > kMaxCliqueEntries) throw CapacityError("clique table exceeds 2^25 entries");
}

}  // namespace

Beliefs eliminate_marginals(const FactorGraph& graph, std::span<const VertexId> order_in) {
  const std::size_t n = graph.num_variables();
  std::vector<VertexId> order(order_in.begin(), order_in.end());
  if (order.empty()) order = min_degree_order(graph);
  {
    std::vector<VertexId> check = order;
    std::sort(check.begin(), check.end());
    bool ok = check.size() == n;
    for (std::size_t i = 0; ok && i < n; ++i) ok = check[i] == i;
    if (!ok) throw ArgumentError("elimination order must be a permutation of the variables");
  }
  check_elimination_capacity(graph, order);

  std::vector<LogTable> originals;
  originals.reserve(graph.num_factors());
  for (std::size_t f = 0; f < graph.num_factors(); ++f) originals.push_back(from_factor(graph.factor_at(f)));

  // An input is either an original factor (child < 0) or the message of a child clique.
  struct Input {
    const LogTable* table;
    std::ptrdiff_t child;
  };
  struct Clique {
    VertexId var;
    std::vector<VertexId> scope;
    std::vector<Input> inputs;
    LogTable up;  // message to the parent over scope \ {var}
  };
  std::vector<Clique> cliques;
  cliques.reserve(n);

  // pool entries: (table index in originals or clique id, is_clique)
  std::vector<std::pair<std::size_t, bool>> pool;
  for (std::size_t f = 0; f < originals.size(); ++f) pool.emplace_back(f, false);

  for (VertexId var : order) {
    Clique c;
    c.var = var;
    std::vector<std::pair<std::size_t, bool>> rest;
    for (const auto& entry : pool) {
      const LogTable& t = entry.second ? cliques[entry.first].up : originals[entry.first];
      if (std::binary_search(t.vars.begin(), t.vars.end(), var)) {
        c.inputs.push_back({&t, entry.second ? static_cast<std::ptrdiff_t>(entry.first) : -1});
      } else {
        rest.push_back(entry);
      }
    }
    pool.swap(rest);
    std::vector<const LogTable*> tables;
    for (const Input& in : c.inputs) tables.push_back(in.table);
    c.scope = union_scope(tables);
    if (c.scope.empty()) c.scope = {var};
    if (c.scope.size() - 1 > kMaxInducedWidth) {
      throw CapacityError("induced width " + std::to_string(c.scope.size() - 1) +
                          " exceeds the elimination cap of 12");
    }
    if (table_entries(c.scope, graph) > kMaxCliqueEntries) {
      throw CapacityError("clique table exceeds 2^25 entries");
    }
    LogTable psi = product(tables, c.scope, graph);
    std::vector<VertexId> sep;
    for (VertexId v : c.scope) {
      if (v != var) sep.push_back(v);
    }
    c.up = marginalize(psi, sep);
    cliques.push_back(std::move(c));
    pool.emplace_back(cliques.size() - 1, true);
  }

  // Downward pass: parents were created after their children.
  Beliefs out(n);
  std::vector<std::optional<LogTable>> down(cliques.size());
  for (std::size_t i = cliques.size(); i > 0; --i) {
    const Clique& c = cliques[i - 1];
    std::vector<const LogTable*> tables;
    for (const Input& in : c.inputs) tables.push_back(in.table);
    if (down[i - 1]) tables.push_back(&*down[i - 1]);

    const LogTable belief = product(tables, c.scope, graph);
    const LogTable marginal = marginalize(belief, {c.var});
    out[c.var] = normalized_from_logs(Eigen::Map<const Vector>(marginal.values.data(),
                                                               static_cast<Eigen::Index>(marginal.values.size())));

    for (std::size_t k = 0; k < c.inputs.size(); ++k) {
      if (c.inputs[k].child < 0) continue;
      std::vector<const LogTable*> others;
      for (std::size_t j = 0; j < tables.size(); ++j) {
        if (j != k) others.push_back(tables[j]);
      }
      const auto child = static_cast<std::size_t>(c.inputs[k].child);
      const LogTable without = product(others, c.scope, graph);
      down[child] = marginalize(without, cliques[child].up.vars);
    }
  }
  return out;
}

Beliefs exact_marginals(const FactorGraph& graph) {
  std::uint64_t states = 1;
  bool small = true;
  for (int c : graph.cardinalities()) {
    states *= static_cast<std::uint64_t>(c);
    if (states > (std::uint64_t{1} << 16)) {
      small = false;
      break;
    }
  }
  if (small) return enumerate_marginals(graph);
  // Min-degree is greedy and can lose to plain id order, which on row-major
  // grids is the row-band order with width = row length.
  std::vector<VertexId> ids(graph.num_variables());
  std::iota(ids.begin(), ids.end(), VertexId{0});
  const std::vector<VertexId> greedy = min_degree_order(graph);
  const EliminationCost a = elimination_cost(graph, greedy);
  const EliminationCost b = elimination_cost(graph, ids);
  if (within_caps(b) && (!within_caps(a) || b.max_entries < a.max_entries)) return eliminate_marginals(graph, ids);
  return eliminate_marginals(graph, greedy);
}

Beliefs gibbs_marginals(const FactorGraph& graph, std::uint64_t samples, std::uint64_t burn_in,
                        std::uint64_t seed) {
  if (samples <= burn_in) throw ArgumentError("Gibbs sample count must exceed burn-in");
  const std::size_t n = graph.num_variables();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Incidence {
    std::size_t factor;
    std::size_t stride;
  };
  std::vector<std::vector<Incidence>> incident(n);
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& fac = graph.factor_at(f);
    for (std::size_t pos = 0; pos < fac.scope.size(); ++pos) {
      incident[fac.scope[pos]].push_back({f, fac.strides[pos]});
    }
  }

  std::vector<int> x(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, graph.cardinality(static_cast<VertexId>(v)) - 1);
    x[v] = pick(rng);
  }
  std::vector<std::size_t> index(graph.num_factors(), 0);
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& fac = graph.factor_at(f);
    for (std::size_t pos = 0; pos < fac.scope.size(); ++pos) {
      index[f] += fac.strides[pos] * static_cast<std::size_t>(x[fac.scope[pos]]);
    }
  }

  Beliefs counts(n);
  for (std::size_t v = 0; v < n; ++v) counts[v] = Vector::Zero(graph.cardinality(static_cast<VertexId>(v)));
  std::vector<double> logp;
  for (std::uint64_t sweep = 0; sweep < samples; ++sweep) {
    for (std::size_t v = 0; v < n; ++v) {
      const int card = graph.cardinality(static_cast<VertexId>(v));
      logp.assign(static_cast<std::size_t>(card), 0.0);
      for (const Incidence& inc : incident[v]) {
        const Factor& fac = graph.factor_at(inc.factor);
        const std::size_t base = index[inc.factor] - inc.stride * static_cast<std::size_t>(x[v]);
        for (int c = 0; c < card; ++c) {
          logp[c] += std::max(fac.log_table[static_cast<Eigen::Index>(base + inc.stride * c)], kLogFloor);
        }
      }
      const double top = *std::max_element(logp.begin(), logp.end());
      double total = 0.0;
      for (double& lp : logp) total += (lp = std::exp(lp - top));
      double u = unit(rng) * total;
      int pick = card - 1;
      for (int c = 0; c < card; ++c) {
        if (u < logp[c]) {
          pick = c;
          break;
        }
        u -= logp[c];
      }
      if (pick != x[v]) {
        for (const Incidence& inc : incident[v]) {
          index[inc.factor] = index[inc.factor] + inc.stride * static_cast<std::size_t>(pick) -
                              inc.stride * static_cast<std::size_t>(x[v]);
        }
        x[v] = pick;
      }
    }
    if (sweep >= burn_in) {
      for (std::size_t v = 0; v < n; ++v) counts[v][x[v]] += 1.0;
    }
  }
  const double kept = static_cast<double>(samples - burn_in);
  for (Vector& c : counts) c /= kept;
  return counts;
}

std::vector<double> per_variable_l1(const Beliefs& a, const Beliefs& b) {
  if (a.size() != b.size()) throw ArgumentError("belief sets cover different variable counts");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw ArgumentError("cardinality mismatch at variable " + std::to_string(i));
    }
    out[i] = (a[i] - b[i]).cwiseAbs().sum();
  }
  return out;
}

double accuracy(const Beliefs& a, const Beliefs& b) {
  const auto l1 = per_variable_l1(a, b);
  if (l1.empty()) return 0.0;
  double sum = 0.0;
  for (double d : l1) sum += d;
  return sum / static_cast<double>(l1.size());
}

void write_beliefs(const Beliefs& beliefs, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    out << i;
    for (Eigen::Index k = 0; k < beliefs[i].size(); ++k) out << ' ' << beliefs[i][k];
    out << '\n';
  }
}

Beliefs read_beliefs(std::istream& in) {
  std::map<std::size_t, Vector> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    long long id = -1;
    if (!(ss >> id)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("expected '<var_id> <p_0> ...'", line_no);
    }
    std::vector<double> probs;
    for (double p; ss >> p;) probs.push_back(p);
    if (!ss.eof()) throw ParseError("malformed probability", line_no);
    if (id < 0 || probs.empty()) throw ParseError("expected '<var_id> <p_0> ...'", line_no);
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw ParseError("negative probability", line_no);
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParseError("probabilities do not sum to 1", line_no);
    if (!rows.emplace(static_cast<std::size_t>(id), Eigen::Map<Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()))).second) {
      throw ParseError("duplicate variable " + std::to_string(id), line_no);
    }
  }
  Beliefs out;
  out.reserve(rows.size());
  for (const auto& [id, probs] : rows) {
    if (id != out.size()) throw ParseError("variable ids must be contiguous from 0", line_no);
    out.push_back(probs);
  }
  return out;
}

void save_beliefs(const Beliefs& beliefs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_beliefs(beliefs, out);
}

Beliefs load_beliefs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_beliefs(in);
}

}  // namespace dbrs
