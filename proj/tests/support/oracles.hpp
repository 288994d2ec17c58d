#pragma once

// Independent reference implementations used to check the library.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "livewire/cost_model.hpp"
#include "livewire/grid.hpp"

namespace oracle {

using livewire::GridSize;
using livewire::Image;
using livewire::Mask;
using livewire::Pixel;

inline constexpr std::int64_t kInf = INT64_MAX;

/// Step weight of entering a pixel of base cost `c`: c, or c*sqrt(2) rounded on diagonals.
std::int64_t step_weight(int c, bool diagonal);

/// Bellman-Ford over the 8-connected grid. Returns kInf for unreachable pixels.
std::vector<std::int64_t> bellman_ford(const livewire::Grid<std::uint8_t>& cost, Pixel seed, const Mask* mask = nullptr);

/// Min-path chamfer distance (10 axial, 14 diagonal) by repeated relaxation to a fixpoint.
std::vector<std::int64_t> chamfer_fixpoint(const Mask& boundary);

/// Plain-loop Sobel magnitude with clamped borders.
std::vector<double> sobel_magnitude(const Image& img);
/// Plain-loop 4-neighbour Laplacian with clamped borders.
std::vector<double> laplacian4(const Image& img);

/// Small PGM reader: P2 and P5, comments, maxval 255.
Image read_pgm(std::istream& in);

struct ObjMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<long, 3>> faces;  // 0-based
  std::vector<std::string> comments;
};
/// Minimal Wavefront reader: v, f (first three indices, v/vt/vn accepted), # comments.
ObjMesh parse_obj(const std::string& text);

struct MeshCheck {
  bool indices_in_range = true;
  bool non_degenerate = true;
  /// Every undirected edge used by one or two faces, and no directed edge twice.
  bool edge_manifold = true;
  std::size_t boundary_edges = 0;
  std::size_t interior_edges = 0;
  std::string problem;
};
MeshCheck check_mesh(const ObjMesh& mesh);

livewire::StaticCostField random_field(GridSize size, std::mt19937_64& rng, int lo = 1, int hi = 255);
Mask random_mask(GridSize size, double density, std::mt19937_64& rng);

}  // namespace oracle
