#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "livewire/cost_model.hpp"
#include "livewire/grid.hpp"
#include "livewire/image_ops.hpp"
#include "livewire/livewire3d.hpp"
#include "livewire/volume_io.hpp"

namespace livewire {

// Contour errors ------------------------------------------------------------------

struct ContourError {
  /// Sum over b's rasterised pixels of their distance to a, in pixels.
  double sum = 0.0;
  std::size_t pixels = 0;
  /// sum / pixels.
  double mean = 0.0;
};

/// Directed distance-transform error of b measured against a.
ContourError contour_error_detail(const Polyline& a, const Polyline& b, GridSize size);
inline double contour_error(const Polyline& a, const Polyline& b, GridSize size) {
  return contour_error_detail(a, b, size).mean;
}

struct RunResult {
  std::string id;
  ContourSet contours;
  std::vector<double> slice_millis;
  int seed_points = 0;
  int auto_corrections = 0;
  bool converged = true;
  std::string message;
};

struct PairError {
  std::string run_a;
  std::string run_b;
  int slice = 0;
  double error = 0.0;
};

/// contour_error over every ordered pair of distinct runs on one slice.
std::vector<PairError> pairwise_errors(std::span<const RunResult> runs, int slice, GridSize size);
/// Mean of the ordered-pair errors.
double mutual_error(std::span<const RunResult> runs, int slice, GridSize size);
/// Population standard deviation of the ordered-pair errors.
double repeatability(std::span<const RunResult> runs, int slice, GridSize size);

double mean_of(std::span<const double> values);
double population_stddev(std::span<const double> values);

struct SliceSummary {
  int slice = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct ErrorProfile {
  std::vector<SliceSummary> slices;
  double mean = 0.0;
  double two_norm = 0.0;
};

/// Slices covered by every run.
std::vector<int> common_slices(std::span<const RunResult> runs);
/// Pairwise errors and per-slice summaries over the common slices.
ErrorProfile evaluate_runs(std::span<const RunResult> runs, GridSize size, std::vector<PairError>* pairs = nullptr);
/// Smallest grid holding every contour point of every run.
GridSize bounding_size(std::span<const RunResult> runs);

void write_pairs_csv(std::span<const PairError> pairs, std::ostream& out);
std::string summary_json(const ErrorProfile& profile);

// Phantoms ----------------------------------------------------------------------------------

enum class PhantomKind { Cylinder, Cone, TwoEdgePlate, Ellipsoid };

std::string to_string(PhantomKind kind);
PhantomKind parse_phantom_kind(const std::string& name);

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Cylinder;
  int width = 64;
  int height = 64;
  int depth = 8;
  double spacing = 1.0;
  Point2 center{32.0, 32.0};
  /// Cylinder and cone radius on slice 0; ellipsoid in-plane semi-axis x.
  double radius = 12.0;
  /// Cone radius decrease per slice.
  double radius_step = 1.0;
  /// Ellipsoid in-plane semi-axis y and semi-axis along slices.
  double radius_y = 10.0;
  double radius_z = 3.5;
  int background = 60;
  int contrast = 120;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;

  /// Plate: columns where the weak (low|mid) and strong (mid|high) steps sit.
  int weak_edge = 20;
  int edge_gap = 6;
  int plate_low = 40;
  int plate_mid = 80;
  int plate_high = 160;
  /// Intensity of a calibration square in the top-left corner; 0 disables it.
  int reference_level = 255;

  void validate() const;

  /// 48x128 single-slice plate with the weak edge at column 20.
  static PhantomSpec two_edge_plate();
};

/// In-plane ellipse of a slice's cross-section.
struct Ellipse {
  Point2 center;
  double rx = 0.0;
  double ry = 0.0;
};

/// Synthetic volume with analytic ground truth.
class Phantom {
 public:
  explicit Phantom(PhantomSpec spec);

  const PhantomSpec& spec() const { return spec_; }
  const Volume& volume() const { return volume_; }

  /// Cross-section of slice k; nullopt when the object misses the slice or for the plate.
  std::optional<Ellipse> cross_section(int k) const;
  /// Dense polygon of the true boundary on slice k. Open for the plate (the weak edge line).
  std::vector<Point2> ground_truth(int k, int samples = 720) const;
  bool ground_truth_closed() const { return spec_.kind != PhantomKind::TwoEdgePlate; }
  /// ground_truth rounded to pixels, consecutive duplicates removed.
  Polyline ground_truth_pixels(int k) const;

  /// Plate edge lines as x positions between pixel columns.
  double weak_line() const { return spec_.weak_edge - 0.5; }
  double strong_line() const { return spec_.weak_edge + spec_.edge_gap - 0.5; }

  /// Boundary of the object in the orthogonal cut image over slices [first, last].
  CutBoundary cut_boundary(const CutLine& cut, int first, int last) const;

 private:
  double coverage(int x, int y, int k) const;

  PhantomSpec spec_;
  Volume volume_;
};

/// Two perpendicular diameters through the phantom centre, consistently oriented.
std::vector<CutLine> perpendicular_cuts(const Phantom& phantom, double margin = 4.0);
/// Segment covering slices [first, last] of the phantom, with analytic cut boundaries.
TopologySegment analytic_segment(const Phantom& phantom, const std::vector<CutLine>& cuts, int first, int last);

// Scripted user ------------------------------------------------------------------------------

struct UserStrategy {
  /// Seeds placed before any correction; the plate uses its two ends when 2.
  int initial_seeds = 4;
  double jitter_sigma = 0.0;
  /// Maximum allowed wire distance from the true boundary before a correction.
  double tolerance = 1.5;
  int seed_budget = 64;
  CostWeights weights;
  const TrainedMapping* mapping = nullptr;
  std::uint64_t rng_seed = 1;
  /// Slices to segment; empty means every slice with a cross-section.
  std::vector<int> slices;
};

/// Places seeds on the analytic boundary, adding a corrective seed at the worst
/// wire pixel whenever a wire strays beyond the tolerance.
RunResult scripted_user(const Phantom& phantom, const UserStrategy& strategy, const std::string& run_id = "run");

std::string run_to_json(const RunResult& run);
RunResult run_from_json(const std::string& text);

/// Distance from p to a polyline (closed or open).
double polyline_distance(std::span<const Point2> line, bool closed, Point2 p);

}  // namespace livewire
