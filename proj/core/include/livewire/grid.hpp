#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace livewire {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file or stream could not be parsed. `where` names the line or byte offset.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::string where)
      : Error(where.empty() ? message : where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct Pixel {
  int x = 0;
  int y = 0;

  friend constexpr bool operator==(Pixel, Pixel) = default;
  friend constexpr auto operator<=>(Pixel, Pixel) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr bool operator==(Point2, Point2) = default;
  constexpr Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  constexpr Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Point2 to_point(Pixel p) { return {static_cast<double>(p.x), static_cast<double>(p.y)}; }

using Polyline = std::vector<Pixel>;

/// Every real-to-integer conversion in the library goes through this.
inline double round_half_up(double v) { return std::floor(v + 0.5); }

struct GridSize {
  int width = 0;
  int height = 0;

  friend constexpr bool operator==(GridSize, GridSize) = default;
  constexpr bool contains(Pixel p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
  constexpr std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  constexpr std::size_t index(Pixel p) const {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(p.x);
  }
};

/// Row-major 2D array. x grows rightward, y grows downward.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : size_{width, height} {
    if (width < 0 || height < 0) throw InvalidArgument("grid dimensions must be non-negative");
    data_.assign(size_.area(), fill);
  }
  Grid(GridSize size, T fill = T{}) : Grid(size.width, size.height, fill) {}

  int width() const noexcept { return size_.width; }
  int height() const noexcept { return size_.height; }
  GridSize size() const noexcept { return size_; }
  bool contains(Pixel p) const noexcept { return size_.contains(p); }
  bool contains(int x, int y) const noexcept { return size_.contains({x, y}); }

  T& operator()(int x, int y) { return data_[size_.index({x, y})]; }
  const T& operator()(int x, int y) const { return data_[size_.index({x, y})]; }
  T& operator[](Pixel p) { return data_[size_.index(p)]; }
  const T& operator[](Pixel p) const { return data_[size_.index(p)]; }

  /// Edge-replicating read: coordinates are clamped into the grid.
  const T& clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= size_.width ? size_.width - 1 : x);
    y = y < 0 ? 0 : (y >= size_.height ? size_.height - 1 : y);
    return (*this)(x, y);
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridSize size_{};
  std::vector<T> data_;
};

/// 8-bit grayscale slice.
using Image = Grid<std::uint8_t>;
/// Real-valued image, used for filter intermediates.
using RealImage = Grid<double>;

/// Binary pixel mask. Kept distinct from Image so the two cannot be swapped by accident.
class Mask {
 public:
  Mask() = default;
  explicit Mask(GridSize size, bool fill = false) : cells_(size, fill ? 1 : 0) {}
  Mask(int width, int height, bool fill = false) : Mask(GridSize{width, height}, fill) {}

  int width() const noexcept { return cells_.width(); }
  int height() const noexcept { return cells_.height(); }
  GridSize size() const noexcept { return cells_.size(); }
  bool contains(Pixel p) const noexcept { return cells_.contains(p); }

  bool test(Pixel p) const { return cells_[p] != 0; }
  bool test(int x, int y) const { return cells_(x, y) != 0; }
  void set(Pixel p, bool on = true) { cells_[p] = on ? 1 : 0; }
  void set(int x, int y, bool on = true) { cells_(x, y) = on ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto c : cells_.values()) n += c;
    return n;
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Grid<std::uint8_t> cells_;
};

/// The 8 compass steps in clockwise order (y down), starting east.
inline constexpr Pixel kSteps[8] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};

inline constexpr bool is_diagonal(int dir) { return (dir & 1) != 0; }

/// Direction index of the step a->b, or -1 when b is not an 8-neighbour of a.
inline constexpr int step_direction(Pixel a, Pixel b) {
  for (int d = 0; d < 8; ++d) {
    if (a.x + kSteps[d].x == b.x && a.y + kSteps[d].y == b.y) return d;
  }
  return -1;
}

inline constexpr bool are_8_adjacent(Pixel a, Pixel b) { return step_direction(a, b) >= 0; }

}  // namespace livewire
