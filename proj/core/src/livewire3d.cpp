#include "livewire/livewire3d.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "livewire/engine.hpp"

namespace livewire {

// Distance transform ---------------------------------------------------------

DTField chamfer_dt(const Mask& boundary) {
  if (boundary.empty()) throw InvalidArgument("distance transform needs a non-empty boundary");
  const int w = boundary.width();
  const int h = boundary.height();
  // 3 * image_width, widened to the larger side so tall images stay unreachable-free.
  const std::int32_t far = 3 * std::max(w, h) * kChamferAxial;
  DTField dt(w, h, far);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (boundary.test(x, y)) dt(x, y) = 0;

  auto relax = [&](int x, int y, int nx, int ny, int weight) {
    if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
    dt(x, y) = std::min(dt(x, y), dt(nx, ny) + weight);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      relax(x, y, x - 1, y - 1, kChamferDiagonal);
      relax(x, y, x, y - 1, kChamferAxial);
      relax(x, y, x + 1, y - 1, kChamferDiagonal);
      relax(x, y, x - 1, y, kChamferAxial);
    }
  }
  for (int y = h - 1; y >= 0; --y) {
    for (int x = w - 1; x >= 0; --x) {
      relax(x, y, x + 1, y + 1, kChamferDiagonal);
      relax(x, y, x, y + 1, kChamferAxial);
      relax(x, y, x - 1, y + 1, kChamferDiagonal);
      relax(x, y, x + 1, y, kChamferAxial);
    }
  }
  return dt;
}

Mask rasterize_polyline(GridSize size, std::span<const Pixel> points, bool closed) {
  Mask m(size);
  auto plot = [&](Pixel p) {
    if (!size.contains(p)) throw InvalidArgument("contour point outside image");
    m.set(p);
  };
  auto line = [&](Pixel a, Pixel b) {
    int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
    int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      plot(a);
      if (a == b) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        a.x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        a.y += sy;
      }
    }
  };
  if (points.empty()) return m;
  plot(points.front());
  for (std::size_t i = 1; i < points.size(); ++i) line(points[i - 1], points[i]);
  if (closed && points.size() > 2) line(points.back(), points.front());
  return m;
}

Mask strip_mask(const DTField& dt, int width) {
  if (width < 1) throw InvalidArgument("strip width must be at least 1");
  const std::int64_t threshold = std::int64_t{kChamferAxial} * width;
  Mask m(dt.size());
  for (int y = 0; y < dt.height(); ++y)
    for (int x = 0; x < dt.width(); ++x)
      if (dt(x, y) <= threshold) m.set(x, y);
  return m;
}

// Cut geometry -------------------------------------------------------------------

void StripParams::validate() const {
  if (!(safety_factor >= 1.1 - 1e-12 && safety_factor <= 2.0 + 1e-12)) {
    throw InvalidArgument("safety factor must be in [1.1, 2.0]");
  }
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Pixel to_pixel(Point2 p) {
  return {static_cast<int>(round_half_up(p.x)), static_cast<int>(round_half_up(p.y))};
}

/// Proper or touching intersection of closed segments ab and cd.
bool segments_intersect(Point2 a, Point2 b, Point2 c, Point2 d) {
  auto cross = [](Point2 o, Point2 p, Point2 q) { return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x); };
  auto sign = [](double v) { return v > 1e-12 ? 1 : (v < -1e-12 ? -1 : 0); };
  auto on_segment = [](Point2 p, Point2 q, Point2 r) {
    return std::min(p.x, q.x) - 1e-12 <= r.x && r.x <= std::max(p.x, q.x) + 1e-12 &&
           std::min(p.y, q.y) - 1e-12 <= r.y && r.y <= std::max(p.y, q.y) + 1e-12;
  };
  const int d1 = sign(cross(c, d, a));
  const int d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c));
  const int d4 = sign(cross(a, b, d));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

double signed_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 p = poly[i];
    const Point2 q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

bool is_simple_polygon(const std::vector<Point2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (distance(poly[i], poly[(i + 1) % n]) < 1e-9) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return std::abs(signed_area(poly)) > 1e-9;
}

std::vector<Point2> cyclic_sequence(const std::vector<SliceSeeds>& seeds) {
  std::vector<Point2> seq;
  for (const auto& s : seeds) seq.push_back(s.start);
  for (const auto& s : seeds) seq.push_back(s.end);
  return seq;
}

bool polyline_closed(const Polyline& p) {
  return p.size() > 2 && (p.front() == p.back() || are_8_adjacent(p.front(), p.back()));
}

}  // namespace

std::vector<double> row_crossings(const Polyline& polyline, int row, int wiggle_radius) {
  if (wiggle_radius < 0) throw InvalidArgument("wiggle radius must be non-negative");
  // Maximal runs of consecutive polyline points lying on the row.
  std::vector<std::vector<double>> runs;
  bool in_run = false;
  for (Pixel p : polyline) {
    if (p.y == row) {
      if (!in_run) runs.emplace_back();
      runs.back().push_back(p.x);
      in_run = true;
    } else {
      in_run = false;
    }
  }
  if (runs.size() > 1 && polyline_closed(polyline) && polyline.front().y == row && polyline.back().y == row) {
    runs.front().insert(runs.front().end(), runs.back().begin(), runs.back().end());
    runs.pop_back();
  }
  std::vector<double> crossings;
  for (const auto& run : runs) {
    const auto [lo, hi] = std::minmax_element(run.begin(), run.end());
    if (*hi - *lo <= wiggle_radius) {
      crossings.push_back(median(run));
    } else {
      crossings.push_back(*lo);
      crossings.push_back(*hi);
    }
  }
  std::sort(crossings.begin(), crossings.end());
  std::vector<double> merged;
  std::vector<double> cluster;
  for (double c : crossings) {
    if (!cluster.empty() && c - cluster.back() > wiggle_radius) {
      merged.push_back(median(cluster));
      cluster.clear();
    }
    cluster.push_back(c);
  }
  if (!cluster.empty()) merged.push_back(median(cluster));
  return merged;
}

SliceSeeds slice_seeds(const CutBoundary& cb, int slice, int wiggle_radius) {
  const auto crossings = row_crossings(cb.polyline, slice, wiggle_radius);
  if (crossings.size() != 2) {
    throw TopologyError("cut boundary meets slice " + std::to_string(slice) + " at " +
                            std::to_string(crossings.size()) + " places, expected 2",
                        slice);
  }
  SliceSeeds s;
  s.start_arc = crossings[0];
  s.end_arc = crossings[1];
  s.start = cb.cut.at(s.start_arc);
  s.end = cb.cut.at(s.end_arc);
  return s;
}

int strip_width_from_branches(const std::vector<std::vector<double>>& branches, const StripParams& params) {
  params.validate();
  double widest = 0.0;
  for (const auto& branch : branches) {
    if (branch.size() < 2) throw InvalidArgument("strip width needs boundaries spanning at least 2 slice rows");
    for (std::size_t i = 1; i < branch.size(); ++i) widest = std::max(widest, std::abs(branch[i] - branch[i - 1]));
  }
  if (branches.empty()) throw InvalidArgument("strip width needs at least one cut boundary");
  return static_cast<int>(std::ceil(params.safety_factor * std::max(widest, 1.0) - 1e-9));
}

int strip_width(const TopologySegment& segment, const StripParams& params, int wiggle_radius) {
  if (segment.last <= segment.first) {
    throw InvalidArgument("strip width needs boundaries spanning at least 2 slice rows");
  }
  std::vector<std::vector<double>> branches;
  for (const auto& cb : segment.cuts) {
    std::vector<double> left, right;
    for (int row = segment.first; row <= segment.last; ++row) {
      const auto s = slice_seeds(cb, row, wiggle_radius);
      left.push_back(s.start_arc);
      right.push_back(s.end_arc);
    }
    branches.push_back(std::move(left));
    branches.push_back(std::move(right));
  }
  return strip_width_from_branches(branches, params);
}

CutOrdering validate_cut_ordering(const TopologySegment& segment, int wiggle_radius) {
  if (segment.cuts.size() < 2) throw InvalidArgument("a segment needs at least 2 cuts");
  std::vector<SliceSeeds> seeds;
  for (const auto& cb : segment.cuts) seeds.push_back(slice_seeds(cb, segment.first, wiggle_radius));

  CutOrdering result;
  result.sequence = cyclic_sequence(seeds);
  if (is_simple_polygon(result.sequence)) {
    result.orientation = signed_area(result.sequence) > 0.0 ? 1 : -1;
    return result;
  }
  result.ok = false;
  // Report the first cut whose reversal alone restores a valid cycle.
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto flipped = seeds;
    std::swap(flipped[i].start, flipped[i].end);
    if (is_simple_polygon(cyclic_sequence(flipped))) {
      result.offending_cut = static_cast<int>(i) + 1;
      return result;
    }
  }
  // Otherwise the first cut that breaks the cycle built so far.
  for (std::size_t k = 2; k <= seeds.size(); ++k) {
    std::vector<SliceSeeds> prefix(seeds.begin(), seeds.begin() + static_cast<std::ptrdiff_t>(k));
    if (!is_simple_polygon(cyclic_sequence(prefix))) {
      result.offending_cut = static_cast<int>(k);
      return result;
    }
  }
  result.offending_cut = static_cast<int>(seeds.size());
  return result;
}

// Sweep ------------------------------------------------------------------------------

Polyline trace_closed_boundary(std::shared_ptr<const StaticCostField> field, const CostWeights& weights,
                               const std::vector<Pixel>& seeds, std::shared_ptr<const Mask> mask,
                               std::size_t* finalized_nodes, bool full_tree) {
  std::vector<Pixel> order;
  for (Pixel p : seeds) {
    if (order.empty() || order.back() != p) order.push_back(p);
  }
  while (order.size() > 1 && order.back() == order.front()) order.pop_back();
  if (order.size() < 2) throw InvalidArgument("closing a boundary needs at least 2 distinct seeds");
  BoundaryTracer tracer(std::move(field), weights, std::move(mask));
  auto grow = [&] {
    if (full_tree) tracer.background_expand(std::numeric_limits<std::size_t>::max());
  };
  tracer.set_seed(order.front());
  grow();
  for (std::size_t i = 1; i < order.size(); ++i) {
    tracer.wire_to(order[i]);
    tracer.commit();
    grow();
  }
  const Boundary& b = tracer.close();
  if (finalized_nodes) *finalized_nodes = tracer.finalized_nodes();
  Polyline contour = b.points();
  if (contour.size() > 1 && contour.back() == contour.front()) contour.pop_back();
  return contour;
}

SegmentationResult segment_volume(const Volume& v, const std::vector<TopologySegment>& segments,
                                  const SegmentationOptions& options) {
  options.weights.validate();
  options.strip.validate();
  if (v.width() < 3 || v.height() < 3) throw InvalidArgument("slices must be at least 3x3 to segment");
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.first < 0 || seg.last >= v.depth() || seg.first > seg.last) {
      throw InvalidArgument("segment " + std::to_string(s + 1) + " slice range outside the volume");
    }
    if (s > 0 && seg.first <= segments[s - 1].last) throw InvalidArgument("segments must be ordered and disjoint");
    for (std::size_t c = 0; c < seg.cuts.size(); ++c) {
      if (seg.cuts[c].polyline.empty()) {
        throw InvalidArgument("cut " + std::to_string(c + 1) + " of segment " + std::to_string(s + 1) +
                              " has no boundary; segment it first");
      }
    }
    const auto ordering = validate_cut_ordering(seg, options.wiggle_radius);
    if (!ordering.ok) {
      throw OrderingError("cuts of segment " + std::to_string(s + 1) + " are not consistently oriented (cut " +
                              std::to_string(ordering.offending_cut) + ")",
                          ordering.offending_cut);
    }
  }

  int total = 0;
  for (const auto& seg : segments) total += seg.last - seg.first + 1;
  SegmentationResult result;
  result.contours.spacing = v.spacing();
  int done = 0;

  for (const auto& seg : segments) {
    result.contours.segments.emplace_back(seg.first, seg.last);
    const int width = seg.last > seg.first ? strip_width(seg, options.strip, options.wiggle_radius) : 0;
    const Polyline* previous = nullptr;
    for (int slice = seg.first; slice <= seg.last; ++slice) {
      if (options.stop.stop_requested()) throw Cancelled();
      const auto t0 = std::chrono::steady_clock::now();

      std::vector<SliceSeeds> cut_seeds;
      for (const auto& cb : seg.cuts) cut_seeds.push_back(slice_seeds(cb, slice, options.wiggle_radius));
      std::vector<Pixel> seeds;
      for (const auto& s : cut_seeds) seeds.push_back(to_pixel(s.start));
      for (const auto& s : cut_seeds) seeds.push_back(to_pixel(s.end));
      for (Pixel p : seeds) {
        if (!v.slice_size().contains(p)) {
          throw UnreachableSeedError("seed outside slice " + std::to_string(slice), slice, p);
        }
      }

      std::shared_ptr<Mask> mask;
      if (previous && options.restrict_to_strip) {
        mask = std::make_shared<Mask>(
            strip_mask(chamfer_dt(rasterize_polyline(v.slice_size(), *previous, true)), width));
        for (Pixel p : seeds) mask->set(p);
      }

      auto field = std::make_shared<const StaticCostField>(static_cost(v.slice(slice), options.weights, options.mapping));
      SliceStats stats;
      stats.slice = slice;
      stats.strip_width = mask ? width : 0;
      stats.search_area = mask ? mask->count() : v.slice_size().area();
      Polyline contour;
      try {
        contour = trace_closed_boundary(field, options.weights, seeds, mask, &stats.finalized_nodes, options.full_tree);
      } catch (const UnreachableError& e) {
        throw UnreachableSeedError("slice " + std::to_string(slice) + ": seed (" + std::to_string(e.pixel().x) + "," +
                                       std::to_string(e.pixel().y) + ") unreachable inside the search strip",
                                   slice, e.pixel());
      }
      stats.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.stats.push_back(stats);
      result.contours.slices.push_back({slice, std::move(contour)});
      previous = &result.contours.slices.back().contour;
      if (options.progress) options.progress(slice, ++done, total);
    }
  }
  return result;
}

// Cut JSON --------------------------------------------------------------------------

std::vector<TopologySegment> parse_cuts_json(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(e.what(), "byte offset " + std::to_string(e.byte));
  }
  std::vector<TopologySegment> out;
  try {
    for (const auto& s : doc.at("segments")) {
      TopologySegment seg;
      seg.first = s.at("first").get<int>();
      seg.last = s.at("last").get<int>();
      for (const auto& c : s.at("cuts")) {
        CutBoundary cb;
        cb.cut.p0 = {c.at("p0").at(0).get<double>(), c.at("p0").at(1).get<double>()};
        cb.cut.p1 = {c.at("p1").at(0).get<double>(), c.at("p1").at(1).get<double>()};
        if (c.contains("boundary")) {
          for (const auto& p : c.at("boundary")) cb.polyline.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        }
        seg.cuts.push_back(std::move(cb));
      }
      out.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("schema violation: ") + e.what(), "cuts");
  }
  return out;
}

std::string cuts_to_json(const std::vector<TopologySegment>& segments) {
  using nlohmann::json;
  json segs = json::array();
  for (const auto& seg : segments) {
    json cuts = json::array();
    for (const auto& cb : seg.cuts) {
      json boundary = json::array();
      for (Pixel p : cb.polyline) boundary.push_back({p.x, p.y});
      cuts.push_back({{"p0", {cb.cut.p0.x, cb.cut.p0.y}}, {"p1", {cb.cut.p1.x, cb.cut.p1.y}}, {"boundary", boundary}});
    }
    segs.push_back({{"first", seg.first}, {"last", seg.last}, {"cuts", cuts}});
  }
  return json{{"segments", segs}}.dump() + "\n";
}

}  // namespace livewire
