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


#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbrs/models.hpp"
#include "dbrs/oracle.hpp"
#include "dbrs/scheduler.hpp"
#include "fixtures.hpp"

using namespace dbrs;
namespace fs = std::filesystem;

namespace {

std::string serialize(const FactorGraph& g) {
  std::ostringstream out;
  write_graph(g, out);
  return out.str();
}

FactorGraph parse(const std::string& text) {
  std::istringstream in(text);
  return read_graph(in);
}

int argmax(const Vector& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

TEST_CASE("graph file round trip") {
  SUBCASE("minimal file") {
    const FactorGraph g = parse("DBRSFG 1\n1 1\n2\n1 0\n1.0 3.0\n");
    CHECK(g.num_edges() == 1);
    CHECK(g.factor_at(0).table == std::vector<double>{1.0, 3.0});
  }
  SUBCASE("generated denoise grid") {
    const FactorGraph g = generate_denoise(DenoiseSpec{10, 10, 5, 1.0, 1.0, 0.5, 4}).graph;
    const FactorGraph back = parse(serialize(g));
    CHECK(back == g);
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
      const auto a = g.neighbors(v);
      const auto b = back.neighbors(v);
      CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    for (std::size_t f = 0; f < g.num_factors(); ++f) {
      for (std::size_t i = 0; i < g.factor_at(f).size(); ++i) {
        const double x = g.factor_at(f).table[i];
        CHECK(std::abs(back.factor_at(f).table[i] - x) <= 1e-15 * x);
      }
    }
    CHECK(serialize(back) == serialize(g));
  }
  SUBCASE("files on disk") {
    const fs::path dir = fs::temp_directory_path() / "dbrs_models_test";
    fs::create_directories(dir);
    const FactorGraph g = random_chain(9, 3, 2);
    save_graph(g, dir / "g.fg");
    CHECK(load_graph(dir / "g.fg") == g);
    CHECK_THROWS(load_graph(dir / "missing.fg"));
  }
}

TEST_CASE("graph file errors name the line") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("DBRSFG 2\n1 0\n2\n") == 1);
  CHECK(line_of("DBRSFG 1\n1 1\n2\n1 0\n1.0 0.0\n") == 5);
  CHECK(line_of("DBRSFG 1\n1 1\n2\n1 4\n1.0 1.0\n") == 4);
  CHECK(line_of("DBRSFG 1\n1 1\n2\n1 0\n1.0 1.0 2.0\n") == 5);
  CHECK(line_of("DBRSFG 1\n2 0\n2\n") == 3);
  CHECK(line_of("DBRSFG 1\n1 1\n2\n1 0\n1.0 abc\n") == 5);
  CHECK(line_of("DBRSFG 1\n1 1\n2\n1 0\n") == 5);
  try {
    parse("DBRSFG 1\n1 1\n2\n1 0\n1.0 0.0\n");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 5") == 0);
  }
}

TEST_CASE("denoise grid structure") {
  const FactorGraph tiny = generate_denoise(DenoiseSpec{2, 2, 2, 1.0, 1.0, 0.5, 1}).graph;
  CHECK(tiny.num_variables() == 4);
  CHECK(tiny.num_factors() == 8);
  CHECK(tiny.num_edges() == 12);

  const DenoiseSpec spec{7, 6, 5, 1.0, 1.0, 0.5, 3};
  const FactorGraph g = generate_denoise(spec).graph;
  for (int y = 1; y + 1 < spec.height; ++y) {
    for (int x = 1; x + 1 < spec.width; ++x) CHECK(g.degree(static_cast<VertexId>(y * spec.width + x)) == 5);
  }
  CHECK(g.degree(0) == 3);

  // same seed, same bytes; different seed, different noise
  CHECK(serialize(generate_denoise(spec).graph) == serialize(g));
  auto other = spec;
  other.seed = 4;
  CHECK(serialize(generate_denoise(other).graph) != serialize(g));

  const auto full_size = generate_denoise(DenoiseSpec{100, 100, 5, 1.0, 1.0, 0.5, 1}).graph;
  CHECK(full_size.num_variables() == 10000);
  CHECK_THROWS_AS(generate_denoise(DenoiseSpec{1, 5, 5, 1.0, 1.0, 0.5, 1}), ArgumentError);
  CHECK_THROWS_AS(generate_denoise(DenoiseSpec{5, 5, 1, 1.0, 1.0, 0.5, 1}), ArgumentError);
  CHECK_THROWS_AS(generate_denoise(DenoiseSpec{5, 5, 5, 0.0, 1.0, 0.5, 1}), ArgumentError);
}

TEST_CASE("denoise potentials") {
  const DenoiseSpec spec{4, 4, 3, 0.7, 2.0, 0.5, 9};
  const DenoiseProblem p = generate_denoise(spec);
  // unary of pixel 0
  const Factor& unary = p.graph.factor_at(0);
  REQUIRE(unary.scope == std::vector<VertexId>{0});
  for (int c = 0; c < 3; ++c) {
    const double d = p.noisy.at(0, 0) - c;
    CHECK(unary.table[c] == doctest::Approx(std::max(std::exp(-d * d / (2 * 0.7 * 0.7)), 1e-300)));
  }
  // Potts strength differs between top and bottom halves
  double top = 0.0, bottom = 0.0;
  for (std::size_t f = 0; f < p.graph.num_factors(); ++f) {
    const Factor& fac = p.graph.factor_at(f);
    if (fac.scope.size() != 2) continue;
    const double s = std::log(fac.table[0] / fac.table[1]);
    (static_cast<int>(fac.scope[0]) / spec.width < spec.height / 2 ? top : bottom) = s;
  }
  CHECK(top == doctest::Approx(1.0));
  CHECK(bottom == doctest::Approx(2.0));
}

TEST_CASE("near-noiseless denoising recovers the clean image") {
  const DenoiseSpec spec{5, 5, 3, 0.05, 1.0, 0.5, 2};
  const DenoiseProblem p = generate_denoise(spec);
  const Beliefs exact = eliminate_marginals(p.graph);
  const Beliefs bp = dbrs::testing::sweep_bp(p.graph, 0.0, 1e-10, 500);
  for (int i = 0; i < spec.width * spec.height; ++i) {
    const int clean = static_cast<int>(p.clean.pixels[static_cast<std::size_t>(i)]);
    CHECK(argmax(exact[static_cast<std::size_t>(i)]) == clean);
    CHECK(argmax(bp[static_cast<std::size_t>(i)]) == clean);
  }
  CHECK(accuracy(bp, exact) < 1e-3);
}

TEST_CASE("PGM export and import") {
  const DenoiseSpec spec{9, 8, 5, 1.0, 1.0, 0.5, 1};
  const DenoiseProblem p = generate_denoise(spec);
  const fs::path dir = fs::temp_directory_path() / "dbrs_models_test";
  fs::create_directories(dir);
  write_pgm(p.clean, spec.colors, dir / "clean.pgm");
  const GrayImage back = read_pgm(dir / "clean.pgm", spec.colors);
  CHECK(back.width == 9);
  CHECK(back.height == 8);
  CHECK(back.pixels == p.clean.pixels);
  std::ifstream raw(dir / "clean.pgm", std::ios::binary);
  std::string magic;
  raw >> magic;
  CHECK(magic == "P5");
}

TEST_CASE("premature convergence chain fixture") {
  const ChainFixture fx = premature_convergence_chain();
  CHECK(fx.graph.num_variables() == 5);
  CHECK(fx.graph.num_factors() == 9);
  CHECK(fx.schedule.size() == fx.stage_names.size());
  const double unary[5][2] = {{1.0 / 9, 9}, {0.9, 0.1}, {0.5, 0.5}, {0.1, 0.9}, {9, 1.0 / 9}};
  for (int i = 0; i < 5; ++i) {
    const Factor& f = fx.graph.factor_at(static_cast<std::size_t>(i));
    CHECK(f.scope == std::vector<VertexId>{static_cast<VertexId>(i)});
    CHECK(f.table[0] == doctest::Approx(unary[i][0]));
    CHECK(f.table[1] == doctest::Approx(unary[i][1]));
  }
  // replaying the schedule with the naive residual stalls with X1 wrong
  const Beliefs exact = enumerate_marginals(fx.graph);
  Shard shard = Shard::whole(fx.graph);
  for (const auto& stage : fx.schedule) {
    for (VertexId v : stage) {
      for (const auto& m : update_vertex(shard, v, 0.0)) apply_inbound_message(shard, m.target, m.source, m.message);
    }
  }
  double naive = 0.0, accumulated = 0.0;
  for (VertexId v = 0; v < fx.graph.num_vertices(); ++v) {
    naive = std::max(naive, naive_belief_residual(shard, v));
    accumulated = std::max(accumulated, shard.residual(v, ScheduleMode::belief));
  }
  CHECK(naive <= 1e-12);
  CHECK(accumulated > 0.0);
  CHECK(dbrs::testing::l1(to_linear(shard.at(0).belief), exact[0]) > 0.1);
}

TEST_CASE("random chains") {
  const FactorGraph odd = random_chain(7, 3, 1);
  CHECK(odd.num_vertices() == 7);
  CHECK(odd.num_variables() == 4);
  const FactorGraph even = random_chain(8, 3, 1);
  CHECK(even.num_vertices() == 8);
  CHECK(dbrs::testing::path_order(even).size() == 8);
  CHECK(serialize(random_chain(15, 2, 5)) == serialize(random_chain(15, 2, 5)));
}
