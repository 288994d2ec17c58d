#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "livewire/grid.hpp"
#include "livewire/volume_io.hpp"

namespace livewire {

/// Real-valued per-pixel field with its cached maximum.
struct ScalarField {
  RealImage values;
  double max_value = 0.0;
};

/// |grad I| from the unnormalised 3x3 Sobel pair, borders edge-replicated.
ScalarField gradient_magnitude(const Image& img);

/// 4-neighbour Laplacian (centre -4), borders edge-replicated.
RealImage laplacian(const Image& img);

/// Discrete zero-crossings of the Laplacian.
///
/// A non-zero pixel is flagged when some 4-neighbour has the opposite sign and
/// a magnitude at least as large; on equal magnitudes only the positive side is
/// flagged so that a symmetric step yields a single line. A pixel whose
/// Laplacian is exactly zero is flagged when its 4-neighbours include both a
/// positive and a negative value. Flat regions flag nothing.
Mask laplacian_zero_crossings(const Image& img);

/// Straight line in slice-plane pixel coordinates.
struct CutLine {
  Point2 p0;
  Point2 p1;

  double length() const { return distance(p0, p1); }
  /// Number of unit-spaced samples from p0 toward p1.
  int sample_count() const { return static_cast<int>(std::floor(length() + 1e-9)) + 1; }
  Point2 at(double arc) const;
  /// Throws InvalidArgument when shorter than 2 px.
  void validate() const;
};

double bilinear(const Image& img, Point2 p);

/// Samples at unit arc-length spacing from p0, bilinearly interpolated.
std::vector<double> sample_line(const Image& img, const CutLine& cut);

/// Resampled plane orthogonal to the slices: row k is slice k's profile along the cut.
Image build_orthogonal_cut(const Volume& v, const CutLine& cut);

// Filters ------------------------------------------------------------------

struct AnisotropicDiffusion {
  int iterations = 10;
  double kappa = 20.0;
  double step = 0.2;
};

struct ContrastStretch {
  double center = 128.0;
  double slope = 10.0;
};

struct HistogramEqualization {};

struct UnsharpMask {
  double amount = 1.0;
  double sigma = 1.0;
};

using FilterSpec = std::variant<AnisotropicDiffusion, ContrastStretch, HistogramEqualization, UnsharpMask>;

/// Chebyshev radius of source pixels that can affect one output pixel;
/// nullopt means the whole image.
std::optional<int> influence_radius(const FilterSpec& spec);

void validate(const FilterSpec& spec);

/// Builds a spec from a kind name (anisotropic_diffusion, contrast, histogram_eq,
/// unsharp_mask) and "key=value" parameters; unknown keys are rejected.
FilterSpec make_filter(const std::string& kind, const std::vector<std::pair<std::string, double>>& params);

/// Filters `img`. With a region, only pixels inside it change, and only source
/// pixels within the influence radius of the region are read.
Image apply_filter(const Image& img, const FilterSpec& spec, const Mask* region = nullptr);

/// Mask dilated by a Chebyshev radius.
Mask dilate(const Mask& mask, int radius);

/// Rasterised cut line (Bresenham), the region to pass when only the cut strip is needed.
Mask rasterize_line(GridSize size, const CutLine& cut);

}  // namespace livewire
