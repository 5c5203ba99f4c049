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
#include <stdexcept>
#include <string>
#include <vector>

#include "dbrs/graph.hpp"

namespace dbrs {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// -- DBRSFG text format ---------------------------------------------------------

void write_graph(const FactorGraph& graph, std::ostream& out);
FactorGraph read_graph(std::istream& in);
void save_graph(const FactorGraph& graph, const std::filesystem::path& path);
FactorGraph load_graph(const std::filesystem::path& path);

// -- synthetic denoising grid ---------------------------------------------------

struct DenoiseSpec {
  int width = 100;
  int height = 100;
  int colors = 5;
  /// observation noise, in color-level units
  double sigma = 1.0;
  /// Potts log-penalty for unequal neighbors in the bottom half
  double strength = 1.0;
  /// the top half smooths with strength * top_strength_scale
  double top_strength_scale = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Row-major 8-bit-ish image holding color levels (clean) or real values (noisy).
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct DenoiseProblem {
  FactorGraph graph;
  GrayImage clean;
  GrayImage noisy;
};

/// Clean synthetic image: smooth wide bands in the bottom half, high-frequency
/// texture in the top half.
GrayImage synthetic_image(const DenoiseSpec& spec);

/// Variables are pixels in row-major order; factors are one unary per pixel
/// followed by horizontal then vertical Potts factors.
DenoiseProblem generate_denoise(const DenoiseSpec& spec);
/// Same model built around a caller-supplied clean image of color levels.
DenoiseProblem generate_denoise(const DenoiseSpec& spec, const GrayImage& clean);

/// Binary P5 with 8-bit samples; color levels scale to [0, 255].
void write_pgm(const GrayImage& image, int colors, const std::filesystem::path& path);
/// Reads a P5 image and quantizes samples to `colors` levels.
GrayImage read_pgm(const std::filesystem::path& path, int colors);

// -- five-variable chain counterexample -------------------------------------------

/// Log-strength of the softened equality factor.
inline constexpr double kEqualityStrength = 30.0;

struct ChainFixture {
  FactorGraph graph;
  /// stages of vertex updates; the first and last touch only unary factors
  std::vector<std::vector<VertexId>> schedule;
  std::vector<std::string> stage_names;
  VertexId variable(int i) const { return static_cast<VertexId>(i); }
};

/// Five binary variables on a chain with equality pairwise factors and the
/// skewed unary evidence that lets a belief-change residual stall.
ChainFixture premature_convergence_chain();

/// Chain of `length` vertices alternating variable/pairwise factor, closed by a
/// unary factor when `length` is even.  Tables are random positive.
FactorGraph random_chain(std::size_t length, int cardinality, std::uint64_t seed);

}  // namespace dbrs
