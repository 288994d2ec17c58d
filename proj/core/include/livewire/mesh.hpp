#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "livewire/grid.hpp"
#include "livewire/volume_io.hpp"

namespace livewire {

/// Correspondence between two slices failed.
class MeshError : public Error {
 public:
  MeshError(const std::string& message, int slice) : Error(message), slice_(slice) {}
  int slice() const noexcept { return slice_; }

 private:
  int slice_;
};

/// M points at equal arc-length spacing around a closed contour.
struct SampledContour {
  std::vector<Point2> points;
  double circumference = 0.0;
  /// Perimeter (length-weighted) centroid of the source contour.
  Point2 centroid;
};

/// Closed polygon through `points` with consecutive duplicates removed.
std::vector<Point2> closed_polygon(std::span<const Pixel> contour);

double perimeter(std::span<const Point2> polygon);
Point2 perimeter_centroid(std::span<const Point2> polygon);

/// Vertex with the largest convex turning angle; lowest index on ties.
std::size_t convex_start_vertex(std::span<const Point2> polygon);

/// Equal-arc resampling starting at `start` (defaults to convex_start_vertex).
SampledContour resample(std::span<const Point2> polygon, int samples, std::optional<std::size_t> start = std::nullopt);
SampledContour resample(std::span<const Pixel> contour, int samples);

/// p -> target + scale * (p - center).
struct SimilarityTransform {
  double scale = 1.0;
  Point2 center;
  Point2 target;

  Point2 apply(Point2 p) const { return target + (p - center) * scale; }
  SimilarityTransform inverse() const { return {1.0 / scale, target, center}; }
  /// Translation applied to the origin-centred part, i.e. target - scale * center.
  Point2 translation() const { return target - center * scale; }
};

struct NormalizedContour {
  std::vector<Point2> points;
  /// Maps the original next contour onto `points`.
  SimilarityTransform forward;
  SimilarityTransform inverse() const { return forward.inverse(); }
};

/// Scales `next` about its centroid to prev's circumference and moves its centroid onto prev's.
NormalizedContour normalize_next(const SampledContour& prev, std::span<const Point2> next);

struct Correspondence {
  std::vector<Point2> points;
  /// Unwrapped arc positions on the next contour, strictly increasing.
  std::vector<double> arcs;
};

/// Windowed monotone closest-point search of prev's samples on `next`.
Correspondence correspond(const SampledContour& prev, std::span<const Point2> next, double arc_window);

struct Triangle {
  std::array<std::uint32_t, 3> v;
  friend bool operator==(const Triangle&, const Triangle&) = default;
};

/// Triangles of one band; indices 0..M-1 refer to prev samples, M..2M-1 to next.
std::vector<Triangle> build_band(std::size_t samples);

struct Vertex {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct Mesh {
  struct Band {
    int segment = 0;
    int top_slice = 0;
    int bottom_slice = 0;
    std::size_t first_triangle = 0;
  };

  std::vector<Vertex> vertices;
  std::vector<Triangle> triangles;
  std::vector<Band> bands;
  int samples = 0;
  double arc_window = 0.0;
};

struct MeshOptions {
  int samples = 64;
  /// Window as a fraction of the circumference; default 2 / samples.
  std::optional<double> arc_window_frac;
};

/// Band surfaces through every topology segment of the stack.
Mesh reconstruct(const ContourSet& contours, const MeshOptions& options = {});

/// Wavefront OBJ, 1-based faces. The header comment records M and the arc window.
void write_obj(const Mesh& mesh, std::ostream& out);
std::string to_obj(const Mesh& mesh);

}  // namespace livewire
