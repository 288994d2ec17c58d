#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <utility>
#include <vector>

#include "livewire/cost_model.hpp"
#include "livewire/grid.hpp"
#include "livewire/image_ops.hpp"
#include "livewire/volume_io.hpp"

namespace livewire {

/// Chamfer distances in tenths of a pixel.
using DTField = Grid<std::int32_t>;

inline constexpr int kChamferAxial = 10;
inline constexpr int kChamferDiagonal = 14;

/// Two-pass 3x3 chamfer transform (axial 10, diagonal 14) of a non-empty boundary mask.
DTField chamfer_dt(const Mask& boundary);

/// Pixels of a polyline joined by Bresenham segments; `closed` adds the last->first edge.
Mask rasterize_polyline(GridSize size, std::span<const Pixel> points, bool closed);

/// {p : dist(p) <= 10 * width}.
Mask strip_mask(const DTField& dt, int width);

/// A boundary cannot be split into the expected two crossings on a slice row.
class TopologyError : public Error {
 public:
  TopologyError(const std::string& message, int slice) : Error(message), slice_(slice) {}
  int slice() const noexcept { return slice_; }

 private:
  int slice_;
};

/// Cuts of a segment do not form a consistently oriented cyclic sequence.
class OrderingError : public Error {
 public:
  OrderingError(const std::string& message, int cut) : Error(message), cut_(cut) {}
  /// 1-based index of the offending cut, in creation order.
  int cut() const noexcept { return cut_; }

 private:
  int cut_;
};

/// A seed could not be reached inside the slice's search strip.
class UnreachableSeedError : public Error {
 public:
  UnreachableSeedError(const std::string& message, int slice, Pixel seed)
      : Error(message), slice_(slice), seed_(seed) {}
  int slice() const noexcept { return slice_; }
  Pixel seed() const noexcept { return seed_; }

 private:
  int slice_;
  Pixel seed_;
};

class Cancelled : public Error {
 public:
  Cancelled() : Error("cancelled") {}
};

/// User-segmented boundary in an orthogonal-cut image: x = arc position along the cut, y = slice index.
struct CutBoundary {
  CutLine cut;
  Polyline polyline;
};

struct TopologySegment {
  int first = 0;
  int last = 0;
  std::vector<CutBoundary> cuts;
};

struct StripParams {
  double safety_factor = 1.5;
  void validate() const;
};

inline constexpr int kDefaultWiggleRadius = 3;

/// Column positions where `polyline` crosses `row`, with wiggles closer than
/// `wiggle_radius` columns merged into their median. A run lying along the row
/// wider than the radius contributes its two ends.
std::vector<double> row_crossings(const Polyline& polyline, int row, int wiggle_radius = kDefaultWiggleRadius);

struct SliceSeeds {
  double start_arc = 0.0;  // nearer p0
  double end_arc = 0.0;
  Point2 start;
  Point2 end;
};

/// The two slice-plane points where a cut boundary meets `slice`; TopologyError unless exactly two remain.
SliceSeeds slice_seeds(const CutBoundary& cb, int slice, int wiggle_radius = kDefaultWiggleRadius);

/// ceil(safety * max(1, largest backward difference)) over the given branch column series.
int strip_width_from_branches(const std::vector<std::vector<double>>& branches, const StripParams& params);

/// Strip width for a segment, estimated from the row-to-row motion of its cut boundaries.
int strip_width(const TopologySegment& segment, const StripParams& params, int wiggle_radius = kDefaultWiggleRadius);

struct CutOrdering {
  bool ok = true;
  /// 1-based offending cut when !ok.
  int offending_cut = 0;
  /// +1 clockwise on screen (y down), -1 anticlockwise, 0 when invalid.
  int orientation = 0;
  /// Seeds on the segment's first slice: starts of every cut, then ends, in creation order.
  std::vector<Point2> sequence;
};

CutOrdering validate_cut_ordering(const TopologySegment& segment, int wiggle_radius = kDefaultWiggleRadius);

struct SliceStats {
  int slice = 0;
  std::size_t finalized_nodes = 0;
  std::size_t search_area = 0;
  int strip_width = 0;
  double millis = 0.0;
};

struct SegmentationOptions {
  CostWeights weights;
  const TrainedMapping* mapping = nullptr;
  StripParams strip;
  int wiggle_radius = kDefaultWiggleRadius;
  /// Disable to search the whole image on every slice.
  bool restrict_to_strip = true;
  /// Grow each seed's path tree over the whole search region instead of stopping at the next seed.
  bool full_tree = true;
  std::function<void(int slice, int done, int total)> progress;
  std::stop_token stop;
};

struct SegmentationResult {
  ContourSet contours;
  std::vector<SliceStats> stats;
};

/// Slice-by-slice live-wire through every segment, seeded from the cut boundaries.
SegmentationResult segment_volume(const Volume& v, const std::vector<TopologySegment>& segments,
                                  const SegmentationOptions& options);

/// Closed live-wire boundary through `seeds` in order, on one image.
Polyline trace_closed_boundary(std::shared_ptr<const StaticCostField> field, const CostWeights& weights,
                               const std::vector<Pixel>& seeds, std::shared_ptr<const Mask> mask,
                               std::size_t* finalized_nodes = nullptr, bool full_tree = false);

/// Cut-definition JSON (segments with cut lines and optional boundaries).
std::vector<TopologySegment> parse_cuts_json(const std::string& text);
std::string cuts_to_json(const std::vector<TopologySegment>& segments);

}  // namespace livewire
