#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "livewire/grid.hpp"

namespace livewire {

/// Stack of equally sized 8-bit slices imaged in parallel planes.
class Volume {
 public:
  Volume() = default;
  Volume(int width, int height, int depth, double spacing = 1.0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int depth() const noexcept { return depth_; }
  double spacing() const noexcept { return spacing_; }
  void set_spacing(double spacing);
  GridSize slice_size() const noexcept { return {width_, height_}; }

  std::uint8_t& at(int x, int y, int z) { return voxels_[offset(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return voxels_[offset(x, y, z)]; }

  std::span<std::uint8_t> voxels() noexcept { return voxels_; }
  std::span<const std::uint8_t> voxels() const noexcept { return voxels_; }

  /// Copy of plane k.
  Image slice(int k) const;
  void set_slice(int k, const Image& img);

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  std::size_t offset(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int depth_ = 0;
  double spacing_ = 1.0;
  std::vector<std::uint8_t> voxels_;
};

inline Image slice_of(const Volume& v, int k) { return v.slice(k); }

/// Per-slice closed boundaries grouped into constant-topology ranges.
/// Contours are stored as polygons: the closing edge last->first is implicit.
struct ContourSet {
  struct SliceContour {
    int index = 0;
    Polyline contour;
    friend bool operator==(const SliceContour&, const SliceContour&) = default;
  };

  double spacing = 1.0;
  std::vector<std::pair<int, int>> segments;
  std::vector<SliceContour> slices;

  const SliceContour* find(int slice_index) const;
  /// Throws InvalidArgument when slice indices or segment ranges are out of order.
  void validate() const;

  friend bool operator==(const ContourSet&, const ContourSet&) = default;
};

Volume load_volume(const std::filesystem::path& path);
Volume parse_lwv1(std::istream& in);
void save_volume(const Volume& v, const std::filesystem::path& path);
void write_lwv1(const Volume& v, std::ostream& out);

/// P2 (ASCII) and P5 (binary) PGM with maxval <= 255.
Image load_pgm(const std::filesystem::path& path);
Image parse_pgm(std::istream& in);
void save_pgm(const Image& img, const std::filesystem::path& path);
/// Binary P5 encoding.
std::string encode_pgm(const Image& img);

void save_contours(const ContourSet& c, const std::filesystem::path& path);
ContourSet load_contours(const std::filesystem::path& path);
std::string contours_to_json(const ContourSet& c);
ContourSet contours_from_json(const std::string& text);

}  // namespace livewire
