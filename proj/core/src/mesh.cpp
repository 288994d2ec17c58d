#include "livewire/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace livewire {

namespace {

struct ArcTable {
  std::vector<double> cumulative;  // cumulative[i] = arc position of vertex i; back() = perimeter
  double length() const { return cumulative.back(); }
};

ArcTable arc_table(std::span<const Point2> poly) {
  ArcTable t;
  t.cumulative.reserve(poly.size() + 1);
  t.cumulative.push_back(0.0);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    t.cumulative.push_back(t.cumulative.back() + distance(poly[i], poly[(i + 1) % poly.size()]));
  }
  return t;
}

/// Point at arc position s in [0, L) measured from vertex 0.
Point2 point_at(std::span<const Point2> poly, const ArcTable& t, double s) {
  const double len = t.length();
  s = std::fmod(s, len);
  if (s < 0) s += len;
  auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), s);
  std::size_t seg = static_cast<std::size_t>(std::distance(t.cumulative.begin(), it)) - 1;
  seg = std::min(seg, poly.size() - 1);
  const double seg_len = t.cumulative[seg + 1] - t.cumulative[seg];
  const double u = seg_len > 0 ? (s - t.cumulative[seg]) / seg_len : 0.0;
  const Point2 a = poly[seg];
  const Point2 b = poly[(seg + 1) % poly.size()];
  return a + (b - a) * u;
}

void require_polygon(std::span<const Point2> poly) {
  if (poly.size() < 3) throw InvalidArgument("contour needs at least 3 distinct points");
}

}  // namespace

std::vector<Point2> closed_polygon(std::span<const Pixel> contour) {
  std::vector<Point2> out;
  for (Pixel p : contour) {
    const Point2 q = to_point(p);
    if (out.empty() || out.back() != q) out.push_back(q);
  }
  while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  return out;
}

double perimeter(std::span<const Point2> polygon) {
  if (polygon.size() < 2) return 0.0;
  return arc_table(polygon).length();
}

Point2 perimeter_centroid(std::span<const Point2> polygon) {
  double total = 0.0;
  Point2 acc;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2 a = polygon[i];
    const Point2 b = polygon[(i + 1) % polygon.size()];
    const double len = distance(a, b);
    acc = acc + (a + b) * (0.5 * len);
    total += len;
  }
  if (total <= 0.0) throw InvalidArgument("degenerate contour has zero length");
  return acc * (1.0 / total);
}

std::size_t convex_start_vertex(std::span<const Point2> polygon) {
  require_polygon(polygon);
  double area2 = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Point2 a = polygon[i];
    const Point2 b = polygon[(i + 1) % polygon.size()];
    area2 += a.x * b.y - b.x * a.y;
  }
  const double orientation = area2 >= 0 ? 1.0 : -1.0;
  const std::size_t n = polygon.size();
  std::size_t best = 0;
  double best_turn = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 in = polygon[i] - polygon[(i + n - 1) % n];
    const Point2 out = polygon[(i + 1) % n] - polygon[i];
    const double turn = orientation * std::atan2(in.x * out.y - in.y * out.x, in.x * out.x + in.y * out.y);
    // Tolerance keeps symmetric shapes on the lowest index.
    if (turn > best_turn + 1e-12) {
      best_turn = turn;
      best = i;
    }
  }
  return best;
}

SampledContour resample(std::span<const Point2> polygon, int samples, std::optional<std::size_t> start) {
  if (samples < 3) throw InvalidArgument("resampling needs at least 3 samples");
  require_polygon(polygon);
  const ArcTable t = arc_table(polygon);
  if (t.length() <= 0.0) throw InvalidArgument("degenerate contour has zero length");
  const std::size_t first = start.value_or(convex_start_vertex(polygon));
  if (first >= polygon.size()) throw InvalidArgument("start vertex out of range");
  SampledContour out;
  out.circumference = t.length();
  out.centroid = perimeter_centroid(polygon);
  const double step = t.length() / samples;
  for (int i = 0; i < samples; ++i) out.points.push_back(point_at(polygon, t, t.cumulative[first] + i * step));
  return out;
}

SampledContour resample(std::span<const Pixel> contour, int samples) {
  const auto poly = closed_polygon(contour);
  return resample(poly, samples);
}

NormalizedContour normalize_next(const SampledContour& prev, std::span<const Point2> next) {
  require_polygon(next);
  if (prev.circumference <= 0.0) throw InvalidArgument("previous contour has zero length");
  const double len = perimeter(next);
  if (len <= 0.0) throw InvalidArgument("next contour has zero length");
  NormalizedContour out;
  out.forward = {prev.circumference / len, perimeter_centroid(next), prev.centroid};
  out.points.reserve(next.size());
  for (Point2 p : next) out.points.push_back(out.forward.apply(p));
  return out;
}

Correspondence correspond(const SampledContour& prev, std::span<const Point2> next, double arc_window) {
  require_polygon(next);
  const std::size_t m = prev.points.size();
  if (m < 3) throw InvalidArgument("correspondence needs at least 3 samples");
  const ArcTable t = arc_table(next);
  const double len = t.length();
  if (len <= 0.0) throw InvalidArgument("next contour has zero length");
  if (!(arc_window > 0.0) || arc_window > 0.5 * prev.circumference + 1e-9) {
    throw InvalidArgument("arc window must be in (0, L/2]");
  }
  const std::size_t n = next.size();

  // Closest point to q on arcs [lo, hi] (unwrapped, hi - lo <= len).
  auto closest_in = [&](Point2 q, double lo, double hi) {
    double best_arc = lo;
    double best_d = std::numeric_limits<double>::infinity();
    const int wraps_lo = static_cast<int>(std::floor(lo / len));
    for (int wrap = wraps_lo; wrap <= wraps_lo + 1; ++wrap) {
      for (std::size_t i = 0; i < n; ++i) {
        const double s0 = wrap * len + t.cumulative[i];
        const double s1 = wrap * len + t.cumulative[i + 1];
        const double a = std::max(s0, lo);
        const double b = std::min(s1, hi);
        if (a > b) continue;
        const Point2 p0 = next[i];
        const Point2 p1 = next[(i + 1) % n];
        const double seg = s1 - s0;
        if (seg <= 0.0) continue;
        const Point2 d = p1 - p0;
        double u = ((q.x - p0.x) * d.x + (q.y - p0.y) * d.y) / (seg * seg);
        double s = std::clamp(s0 + u * seg, a, b);
        const Point2 p = p0 + d * ((s - s0) / seg);
        const double dist = distance(p, q);
        if (dist < best_d - 1e-12) {
          best_d = dist;
          best_arc = s;
        }
      }
    }
    return best_arc;
  };

  Correspondence out;
  double s = closest_in(prev.points[0], 0.0, len);
  if (s >= len) s -= len;
  const double end = s + len;
  const double min_step = 1e-6 * len;
  out.arcs.push_back(s);
  out.points.push_back(point_at(next, t, s));
  for (std::size_t i = 1; i < m; ++i) {
    const double lo = out.arcs.back();
    const double hi = std::min(lo + arc_window, end - min_step);
    if (hi <= lo + min_step) {
      throw InvalidArgument("arc window exhausted at sample " + std::to_string(i) + " of " + std::to_string(m));
    }
    double next_s = closest_in(prev.points[i], lo, hi);
    next_s = std::max(next_s, lo + min_step);
    out.arcs.push_back(next_s);
    out.points.push_back(point_at(next, t, next_s));
  }
  return out;
}

std::vector<Triangle> build_band(std::size_t samples) {
  if (samples < 3) throw InvalidArgument("a band needs at least 3 samples");
  const auto m = static_cast<std::uint32_t>(samples);
  std::vector<Triangle> tris;
  tris.reserve(2 * samples);
  for (std::uint32_t i = 0; i < m; ++i) {
    const std::uint32_t j = (i + 1) % m;
    tris.push_back({{i, j, m + i}});
    tris.push_back({{j, m + j, m + i}});
  }
  return tris;
}

Mesh reconstruct(const ContourSet& contours, const MeshOptions& options) {
  if (options.samples < 3) throw InvalidArgument("mesh needs at least 3 samples per contour");
  contours.validate();
  const double frac = options.arc_window_frac.value_or(2.0 / options.samples);
  if (!(frac > 0.0) || frac > 0.5) throw InvalidArgument("arc window fraction must be in (0, 0.5]");

  std::vector<std::pair<int, int>> ranges = contours.segments;
  if (ranges.empty()) {
    // Without declared segments, every run of consecutive slices is one.
    for (const auto& s : contours.slices) {
      if (!ranges.empty() && ranges.back().second + 1 == s.index) {
        ranges.back().second = s.index;
      } else {
        ranges.emplace_back(s.index, s.index);
      }
    }
  }

  Mesh mesh;
  mesh.samples = options.samples;
  const auto m = static_cast<std::size_t>(options.samples);
  const auto band = build_band(m);

  for (std::size_t seg = 0; seg < ranges.size(); ++seg) {
    const auto [first, last] = ranges[seg];
    if (last <= first) throw MeshError("segment needs at least 2 slices", first);
    auto polygon_of = [&](int k) {
      const auto* sc = contours.find(k);
      if (!sc) throw MeshError("slice " + std::to_string(k) + " has no contour", k);
      auto poly = closed_polygon(sc->contour);
      if (poly.size() < 3) throw MeshError("slice " + std::to_string(k) + " contour is degenerate", k);
      return poly;
    };
    auto emit_ring = [&](const std::vector<Point2>& pts, int k) {
      const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
      for (Point2 p : pts) mesh.vertices.push_back({p.x, p.y, k * contours.spacing});
      return base;
    };

    SampledContour prev = resample(polygon_of(first), options.samples);
    mesh.arc_window = std::max(mesh.arc_window, frac * prev.circumference);
    std::uint32_t prev_base = emit_ring(prev.points, first);
    for (int k = first + 1; k <= last; ++k) {
      const auto next = polygon_of(k);
      SampledContour next_samples;
      try {
        const auto norm = normalize_next(prev, next);
        const auto corr = correspond(prev, norm.points, frac * prev.circumference);
        const auto inv = norm.inverse();
        for (Point2 p : corr.points) next_samples.points.push_back(inv.apply(p));
      } catch (const InvalidArgument& e) {
        throw MeshError("slice " + std::to_string(k) + ": " + e.what(), k);
      }
      next_samples.circumference = perimeter(next);
      next_samples.centroid = perimeter_centroid(next);
      const std::uint32_t next_base = emit_ring(next_samples.points, k);

      mesh.bands.push_back({static_cast<int>(seg), k - 1, k, mesh.triangles.size()});
      for (const auto& tri : band) {
        Triangle t;
        for (int c = 0; c < 3; ++c) {
          const auto idx = tri.v[c];
          t.v[c] = idx < m ? prev_base + idx : next_base + (idx - static_cast<std::uint32_t>(m));
        }
        mesh.triangles.push_back(t);
      }
      prev = std::move(next_samples);
      prev_base = next_base;
    }
  }
  return mesh;
}

void write_obj(const Mesh& mesh, std::ostream& out) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << "# livewire band mesh\n";
  s << "# samples " << mesh.samples << "\n";
  s << "# arc_window " << std::setprecision(10) << mesh.arc_window << "\n";
  s << std::fixed << std::setprecision(6);
  for (const auto& v : mesh.vertices) s << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& t : mesh.triangles) s << "f " << t.v[0] + 1 << ' ' << t.v[1] + 1 << ' ' << t.v[2] + 1 << '\n';
  out << s.str();
}

std::string to_obj(const Mesh& mesh) {
  std::ostringstream s;
  write_obj(mesh, s);
  return s.str();
}

}  // namespace livewire
