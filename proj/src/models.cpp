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

#include "dbrs/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace dbrs {

// -- DBRSFG text format ---------------------------------------------------------

void write_graph(const FactorGraph& graph, std::ostream& out) {
  out << "DBRSFG 1\n" << graph.num_variables() << ' ' << graph.num_factors() << '\n';
  const auto cards = graph.cardinalities();
  for (std::size_t i = 0; i < cards.size(); ++i) out << (i ? " " : "") << cards[i];
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const Factor& fac = graph.factor_at(f);
    out << fac.scope.size();
    for (VertexId v : fac.scope) out << ' ' << v;
    out << '\n';
    for (std::size_t i = 0; i < fac.table.size(); ++i) out << (i ? " " : "") << fac.table[i];
    out << '\n';
  }
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next(const char* what) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(std::string("missing ") + what, line_no_ + 1);
    ++line_no_;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(std::move(tok));
    return tokens;
  }

  bool trailing_content() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

template <typename T>
T parse_number(const std::string& tok, std::size_t line, const char* what) {
  T value{};
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(std::string("malformed ") + what + " '" + tok + "'", line);
  }
  return value;
}

}  // namespace

FactorGraph read_graph(std::istream& in) {
  LineReader reader(in);
  const auto header = reader.next("header");
  if (header.size() != 2 || header[0] != "DBRSFG" || header[1] != "1") {
    throw ParseError("expected header 'DBRSFG 1'", reader.line());
  }
  const auto counts = reader.next("variable/factor counts");
  if (counts.size() != 2) throw ParseError("expected '<n_vars> <n_factors>'", reader.line());
  const auto n_vars = parse_number<std::size_t>(counts[0], reader.line(), "variable count");
  const auto n_factors = parse_number<std::size_t>(counts[1], reader.line(), "factor count");

  const auto card_tokens = reader.next("cardinalities");
  if (card_tokens.size() != n_vars) {
    throw ParseError("expected " + std::to_string(n_vars) + " cardinalities", reader.line());
  }
  std::vector<int> cards;
  cards.reserve(n_vars);
  for (const auto& tok : card_tokens) {
    const int c = parse_number<int>(tok, reader.line(), "cardinality");
    if (c < 1) throw ParseError("cardinality must be positive", reader.line());
    cards.push_back(c);
  }

  std::vector<FactorTable> factors(n_factors);
  for (std::size_t f = 0; f < n_factors; ++f) {
    const auto scope_tokens = reader.next("factor scope");
    if (scope_tokens.empty()) throw ParseError("missing factor arity", reader.line());
    const auto arity = parse_number<std::size_t>(scope_tokens[0], reader.line(), "arity");
    if (arity == 0) throw ParseError("factor arity must be positive", reader.line());
    if (scope_tokens.size() != arity + 1) {
      throw ParseError("expected " + std::to_string(arity) + " scope variables", reader.line());
    }
    std::size_t size = 1;
    for (std::size_t k = 0; k < arity; ++k) {
      const auto v = parse_number<VertexId>(scope_tokens[k + 1], reader.line(), "variable index");
      if (v >= n_vars) {
        throw ParseError("variable index " + std::to_string(v) + " out of range", reader.line());
      }
      if (std::find(factors[f].scope.begin(), factors[f].scope.end(), v) !=
          factors[f].scope.end()) {
        throw ParseError("variable " + std::to_string(v) + " repeated in scope", reader.line());
      }
      factors[f].scope.push_back(v);
      size *= static_cast<std::size_t>(cards[v]);
    }
    const auto table_tokens = reader.next("factor table");
    if (table_tokens.size() != size) {
      throw ParseError("table has " + std::to_string(table_tokens.size()) + " entries, expected " +
                           std::to_string(size),
                       reader.line());
    }
    factors[f].values.reserve(size);
    for (const auto& tok : table_tokens) {
      const double x = parse_number<double>(tok, reader.line(), "table entry");
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ParseError("table entry '" + tok + "' is not a finite positive value",
                         reader.line());
      }
      factors[f].values.push_back(x);
    }
  }
  if (reader.trailing_content()) throw ParseError("unexpected trailing content", reader.line());
  return FactorGraph(std::move(cards), std::move(factors));
}

void save_graph(const FactorGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_graph(graph, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FactorGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_graph(in);
}

// -- synthetic denoising grid ---------------------------------------------------

void DenoiseSpec::validate() const {
  if (width < 2 || height < 2) throw ArgumentError("denoise grid must be at least 2x2");
  if (colors < 2) throw ArgumentError("denoise needs at least 2 colors");
  if (!(sigma > 0.0)) throw ArgumentError("noise sigma must be positive");
  if (!(strength >= 0.0) || !(top_strength_scale >= 0.0)) {
    throw ArgumentError("smoothing strength must be nonnegative");
  }
}

GrayImage synthetic_image(const DenoiseSpec& spec) {
  spec.validate();
  GrayImage img{spec.width, spec.height, {}};
  img.pixels.resize(static_cast<std::size_t>(spec.width) * spec.height);
  std::mt19937_64 rng(spec.seed ^ 0x5bd1e995ULL);
  std::uniform_int_distribution<int> pick(0, spec.colors - 1);

  // Top half: random colors on 3x3 cells.  Bottom half: wide vertical bands.
  const int cell = 3;
  const int cells_x = (spec.width + cell - 1) / cell;
  const int cells_y = (spec.height / 2 + cell - 1) / cell + 1;
  std::vector<int> cells(static_cast<std::size_t>(cells_x) * cells_y);
  for (int& c : cells) c = pick(rng);

  const int top_rows = spec.height / 2;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      int level = 0;
      if (y < top_rows) {
        level = cells[static_cast<std::size_t>(y / cell) * cells_x + x / cell];
      } else {
        level = std::min(spec.colors - 1, spec.colors * x / spec.width);
      }
      img.pixels[static_cast<std::size_t>(y) * spec.width + x] = level;
    }
  }
  return img;
}

DenoiseProblem generate_denoise(const DenoiseSpec& spec) {
  return generate_denoise(spec, synthetic_image(spec));
}

DenoiseProblem generate_denoise(const DenoiseSpec& spec, const GrayImage& clean) {
  spec.validate();
  if (clean.width != spec.width || clean.height != spec.height) {
    throw ArgumentError("clean image size does not match the denoise spec");
  }
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  GrayImage noisy{w, h, std::vector<double>(n)};
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.sigma);
  for (std::size_t i = 0; i < n; ++i) noisy.pixels[i] = clean.pixels[i] + noise(rng);

  std::vector<FactorTable> factors;
  factors.reserve(n + static_cast<std::size_t>((w - 1) * h + w * (h - 1)));
  const double inv_two_var = 1.0 / (2.0 * spec.sigma * spec.sigma);
  for (std::size_t i = 0; i < n; ++i) {
    FactorTable unary{{static_cast<VertexId>(i)}, std::vector<double>(spec.colors)};
    for (int c = 0; c < spec.colors; ++c) {
      const double d = noisy.pixels[i] - c;
      unary.values[c] = std::max(std::exp(-d * d * inv_two_var), kProbabilityFloor);
    }
    factors.push_back(std::move(unary));
  }

  const int top_rows = h / 2;
  auto potts = [&](VertexId a, VertexId b, bool top) {
    const double s = top ? spec.strength * spec.top_strength_scale : spec.strength;
    const double off = std::exp(-s);
    FactorTable t{{a, b}, std::vector<double>(static_cast<std::size_t>(spec.colors) * spec.colors)};
    for (int i = 0; i < spec.colors; ++i) {
      for (int j = 0; j < spec.colors; ++j) t.values[static_cast<std::size_t>(i) * spec.colors + j] = i == j ? 1.0 : off;
    }
    factors.push_back(std::move(t));
  };
  auto id = [w](int x, int y) { return static_cast<VertexId>(y * w + x); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) potts(id(x, y), id(x + 1, y), y < top_rows);
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) potts(id(x, y), id(x, y + 1), y < top_rows);
  }

  return DenoiseProblem{FactorGraph(std::vector<int>(n, spec.colors), std::move(factors)), clean,
                        std::move(noisy)};
}

void write_pgm(const GrayImage& image, int colors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  const double scale = colors > 1 ? 255.0 / (colors - 1) : 0.0;
  for (double p : image.pixels) {
    const double v = std::clamp(std::round(p * scale), 0.0, 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(v)));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path, int colors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto token = [&]() {
    std::string tok;
    char c = 0;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        tok.push_back(c);
        break;
      }
    }
    while (in.get(c) && !std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
    return tok;
  };
  if (token() != "P5") throw ParseError("expected binary PGM magic 'P5'", 1);
  GrayImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    const int maxval = std::stoi(token());
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
      throw ParseError("unsupported PGM geometry or depth", 1);
    }
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (double& p : img.pixels) {
      char c = 0;
      if (!in.get(c)) throw ParseError("truncated PGM pixel data", 1);
      const double raw = static_cast<unsigned char>(c);
      p = std::round(raw / maxval * (colors - 1));
    }
  } catch (const std::logic_error&) {
    throw ParseError("malformed PGM header", 1);
  }
  return img;
}

// -- chains -----------------------------------------------------------------------

ChainFixture premature_convergence_chain() {
  std::vector<FactorTable> factors = {
      {{0}, {1.0 / 9.0, 9.0}},   {{1}, {0.9, 0.1}}, {{2}, {0.5, 0.5}},
      {{3}, {0.1, 0.9}},         {{4}, {9.0, 1.0 / 9.0}},
  };
  const double same = std::exp(kEqualityStrength);
  for (VertexId i = 0; i + 1 < 5; ++i) factors.push_back({{i, i + 1}, {same, 1.0, 1.0, same}});

  ChainFixture fx{FactorGraph(std::vector<int>(5, 2), std::move(factors)), {}, {}};
  // vertex ids: X1..X5 = 0..4, unary factors 5..9, pairwise P12..P45 = 10..13
  const std::vector<VertexId> unary = {5, 6, 7, 8, 9};
  const std::vector<VertexId> inner = {1, 10, 11, 3, 12, 13};  // X2 and X4 with their pairwise factors
  const std::vector<VertexId> ends = {0, 10, 4, 13};            // X1 and X5 with theirs
  fx.schedule = {unary, inner, {2, 11, 12}, ends, inner, ends, unary};
  fx.stage_names = {"unary", "a", "b", "c", "d", "e", "unary"};
  return fx;
}

FactorGraph random_chain(std::size_t length, int cardinality, std::uint64_t seed) {
  if (length == 0) throw ArgumentError("chain length must be positive");
  const std::size_t n_vars = (length + 1) / 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> entry(0.1, 1.0);
  std::vector<FactorTable> factors;
  const auto pair_size = static_cast<std::size_t>(cardinality) * cardinality;
  for (VertexId i = 0; i + 1 < n_vars; ++i) {
    FactorTable t{{i, i + 1}, std::vector<double>(pair_size)};
    for (double& x : t.values) x = entry(rng);
    factors.push_back(std::move(t));
  }
  if (length % 2 == 0) {
    FactorTable t{{static_cast<VertexId>(n_vars - 1)}, std::vector<double>(cardinality)};
    for (double& x : t.values) x = entry(rng);
    factors.push_back(std::move(t));
  }
  return FactorGraph(std::vector<int>(n_vars, cardinality), std::move(factors));
}

}  // namespace dbrs
