#include "livewire/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "livewire/engine.hpp"

namespace livewire {

using nlohmann::json;

// Contour errors ---------------------------------------------------------------

ContourError contour_error_detail(const Polyline& a, const Polyline& b, GridSize size) {
  if (a.empty() || b.empty()) throw InvalidArgument("contour error needs two non-empty contours");
  for (const auto* c : {&a, &b}) {
    for (Pixel p : *c) {
      if (!size.contains(p)) throw InvalidArgument("contour point outside the image dimensions");
    }
  }
  const DTField dt = chamfer_dt(rasterize_polyline(size, a, true));
  const Mask mb = rasterize_polyline(size, b, true);
  ContourError e;
  std::int64_t total = 0;
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      if (!mb.test(x, y)) continue;
      total += dt(x, y);
      ++e.pixels;
    }
  }
  e.sum = static_cast<double>(total) / kChamferAxial;
  e.mean = e.sum / static_cast<double>(e.pixels);
  return e;
}

namespace {

int chebyshev(Pixel a, Pixel b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

const Polyline& contour_on(const RunResult& run, int slice) {
  const auto* sc = run.contours.find(slice);
  if (!sc) throw InvalidArgument("run '" + run.id + "' has no contour on slice " + std::to_string(slice));
  return sc->contour;
}

void require_two(std::span<const RunResult> runs) {
  if (runs.size() < 2) throw InvalidArgument("mutual error needs at least 2 runs");
}

std::vector<double> error_values(std::span<const RunResult> runs, int slice, GridSize size) {
  std::vector<double> v;
  for (const auto& e : pairwise_errors(runs, slice, size)) v.push_back(e.error);
  return v;
}

}  // namespace

std::vector<PairError> pairwise_errors(std::span<const RunResult> runs, int slice, GridSize size) {
  require_two(runs);
  std::vector<PairError> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = 0; j < runs.size(); ++j) {
      if (i == j) continue;
      out.push_back({runs[i].id, runs[j].id, slice,
                     contour_error(contour_on(runs[i], slice), contour_on(runs[j], slice), size)});
    }
  }
  return out;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty set");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_stddev(std::span<const double> values) {
  const double m = mean_of(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double mutual_error(std::span<const RunResult> runs, int slice, GridSize size) {
  const auto v = error_values(runs, slice, size);
  return mean_of(v);
}

double repeatability(std::span<const RunResult> runs, int slice, GridSize size) {
  const auto v = error_values(runs, slice, size);
  return population_stddev(v);
}

std::vector<int> common_slices(std::span<const RunResult> runs) {
  std::vector<int> out;
  if (runs.empty()) return out;
  for (const auto& sc : runs.front().contours.slices) {
    const bool everywhere = std::all_of(runs.begin(), runs.end(), [&](const RunResult& r) {
      return r.contours.find(sc.index) != nullptr;
    });
    if (everywhere) out.push_back(sc.index);
  }
  return out;
}

ErrorProfile evaluate_runs(std::span<const RunResult> runs, GridSize size, std::vector<PairError>* pairs) {
  require_two(runs);
  const auto slices = common_slices(runs);
  if (slices.empty()) throw InvalidArgument("runs share no slice");
  ErrorProfile profile;
  double sq = 0.0;
  for (int k : slices) {
    const auto errs = pairwise_errors(runs, k, size);
    std::vector<double> v;
    for (const auto& e : errs) v.push_back(e.error);
    if (pairs) pairs->insert(pairs->end(), errs.begin(), errs.end());
    const SliceSummary s{k, mean_of(v), population_stddev(v)};
    profile.slices.push_back(s);
    profile.mean += s.mean;
    sq += s.mean * s.mean;
  }
  profile.mean /= static_cast<double>(slices.size());
  profile.two_norm = std::sqrt(sq);
  return profile;
}

GridSize bounding_size(std::span<const RunResult> runs) {
  GridSize s{0, 0};
  for (const auto& r : runs) {
    for (const auto& sc : r.contours.slices) {
      for (Pixel p : sc.contour) {
        if (p.x < 0 || p.y < 0) throw InvalidArgument("contour has negative coordinates");
        s.width = std::max(s.width, p.x + 1);
        s.height = std::max(s.height, p.y + 1);
      }
    }
  }
  if (s.area() == 0) throw InvalidArgument("runs contain no contour points");
  return s;
}

void write_pairs_csv(std::span<const PairError> pairs, std::ostream& out) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << "run_a,run_b,slice,error_px\n";
  s << std::setprecision(10);
  for (const auto& p : pairs) s << p.run_a << ',' << p.run_b << ',' << p.slice << ',' << p.error << '\n';
  out << s.str();
}

std::string summary_json(const ErrorProfile& profile) {
  json slices = json::array();
  for (const auto& s : profile.slices) slices.push_back({{"slice", s.slice}, {"mean", s.mean}, {"std", s.stddev}});
  return json{{"slices", slices}, {"mean", profile.mean}, {"two_norm", profile.two_norm}}.dump(2) + "\n";
}

// Phantoms -------------------------------------------------------------------------

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::Cylinder: return "cylinder";
    case PhantomKind::Cone: return "cone";
    case PhantomKind::TwoEdgePlate: return "two_edge_plate";
    case PhantomKind::Ellipsoid: return "ellipsoid";
  }
  return "unknown";
}

PhantomKind parse_phantom_kind(const std::string& name) {
  for (auto k : {PhantomKind::Cylinder, PhantomKind::Cone, PhantomKind::TwoEdgePlate, PhantomKind::Ellipsoid}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown phantom kind '" + name + "'");
}

void PhantomSpec::validate() const {
  if (width < 3 || height < 3 || depth < 1) throw InvalidArgument("phantom must be at least 3x3x1");
  if (!(spacing > 0)) throw InvalidArgument("slice spacing must be positive");
  if (!(noise_sigma >= 0)) throw InvalidArgument("noise sigma must be non-negative");
  for (int level : {background, background + contrast, plate_low, plate_mid, plate_high, reference_level}) {
    if (level < 0 || level > 255) throw InvalidArgument("phantom intensities must lie in [0,255]");
  }
  if (kind == PhantomKind::TwoEdgePlate) {
    if (edge_gap < 1 || weak_edge < 1 || weak_edge + edge_gap >= width) {
      throw InvalidArgument("plate edges must lie inside the image");
    }
  } else {
    if (!(radius > 0) || (kind == PhantomKind::Ellipsoid && (!(radius_y > 0) || !(radius_z > 0)))) {
      throw InvalidArgument("phantom radii must be positive");
    }
    const double ry = kind == PhantomKind::Ellipsoid ? radius_y : radius;
    if (center.x - radius < 1 || center.x + radius > width - 2 || center.y - ry < 1 || center.y + ry > height - 2) {
      throw InvalidArgument("phantom cross section must lie inside the image");
    }
  }
}

PhantomSpec PhantomSpec::two_edge_plate() {
  PhantomSpec s;
  s.kind = PhantomKind::TwoEdgePlate;
  s.width = 48;
  s.height = 128;
  s.depth = 1;
  return s;
}

Phantom::Phantom(PhantomSpec spec) : spec_(spec) {
  spec_.validate();
  volume_ = Volume(spec_.width, spec_.height, spec_.depth, spec_.spacing);
  std::vector<double> values(volume_.voxels().size());
  std::size_t i = 0;
  for (int k = 0; k < spec_.depth; ++k) {
    for (int y = 0; y < spec_.height; ++y) {
      for (int x = 0; x < spec_.width; ++x, ++i) {
        if (spec_.kind == PhantomKind::TwoEdgePlate) {
          const int ref_end = 8;
          if (spec_.reference_level > 0 && x >= 2 && x < ref_end && y >= 2 && y < ref_end) {
            values[i] = spec_.reference_level;
          } else if (x < spec_.weak_edge) {
            values[i] = spec_.plate_low;
          } else if (x < spec_.weak_edge + spec_.edge_gap) {
            values[i] = spec_.plate_mid;
          } else {
            values[i] = spec_.plate_high;
          }
        } else {
          values[i] = spec_.background + spec_.contrast * coverage(x, y, k);
        }
      }
    }
  }
  if (spec_.noise_sigma > 0) {
    std::mt19937_64 rng(spec_.seed);
    std::normal_distribution<double> noise(0.0, spec_.noise_sigma);
    for (double& v : values) v += noise(rng);
  }
  auto out = volume_.voxels();
  for (std::size_t j = 0; j < values.size(); ++j) {
    out[j] = static_cast<std::uint8_t>(std::clamp(round_half_up(values[j]), 0.0, 255.0));
  }
}

std::optional<Ellipse> Phantom::cross_section(int k) const {
  if (k < 0 || k >= spec_.depth) throw InvalidArgument("slice index out of range");
  switch (spec_.kind) {
    case PhantomKind::Cylinder:
      return Ellipse{spec_.center, spec_.radius, spec_.radius};
    case PhantomKind::Cone: {
      const double r = spec_.radius - k * spec_.radius_step;
      if (r <= 0) return std::nullopt;
      return Ellipse{spec_.center, r, r};
    }
    case PhantomKind::Ellipsoid: {
      const double zc = 0.5 * (spec_.depth - 1);
      const double t = (k - zc) / spec_.radius_z;
      if (std::abs(t) >= 1.0) return std::nullopt;
      const double f = std::sqrt(1.0 - t * t);
      return Ellipse{spec_.center, spec_.radius * f, spec_.radius_y * f};
    }
    case PhantomKind::TwoEdgePlate:
      return std::nullopt;
  }
  return std::nullopt;
}

double Phantom::coverage(int x, int y, int k) const {
  const auto e = cross_section(k);
  if (!e) return 0.0;
  constexpr int kSub = 4;
  int inside = 0;
  for (int j = 0; j < kSub; ++j) {
    for (int i = 0; i < kSub; ++i) {
      const double px = x + (i + 0.5) / kSub - 0.5;
      const double py = y + (j + 0.5) / kSub - 0.5;
      const double u = (px - e->center.x) / e->rx;
      const double v = (py - e->center.y) / e->ry;
      if (u * u + v * v <= 1.0) ++inside;
    }
  }
  return static_cast<double>(inside) / (kSub * kSub);
}

std::vector<Point2> Phantom::ground_truth(int k, int samples) const {
  if (spec_.kind == PhantomKind::TwoEdgePlate) {
    if (k < 0 || k >= spec_.depth) throw InvalidArgument("slice index out of range");
    return {{weak_line(), 0.0}, {weak_line(), static_cast<double>(spec_.height - 1)}};
  }
  if (samples < 3) throw InvalidArgument("ground truth needs at least 3 samples");
  const auto e = cross_section(k);
  if (!e) throw InvalidArgument("object does not reach slice " + std::to_string(k));
  std::vector<Point2> out;
  for (int i = 0; i < samples; ++i) {
    const double a = 2.0 * std::numbers::pi * i / samples;
    out.push_back({e->center.x + e->rx * std::cos(a), e->center.y + e->ry * std::sin(a)});
  }
  return out;
}

Polyline Phantom::ground_truth_pixels(int k) const {
  const auto gt = ground_truth(k);
  Polyline out;
  for (Point2 p : gt) {
    Pixel q{static_cast<int>(round_half_up(p.x)), static_cast<int>(round_half_up(p.y))};
    q.x = std::clamp(q.x, 0, spec_.width - 1);
    q.y = std::clamp(q.y, 0, spec_.height - 1);
    if (out.empty() || out.back() != q) out.push_back(q);
  }
  if (ground_truth_closed()) {
    while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  }
  return out;
}

namespace {

/// Bresenham points from a (exclusive) to b (inclusive).
void append_line(Polyline& out, Pixel a, Pixel b) {
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  while (a != b) {
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      a.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      a.y += sy;
    }
    out.push_back(a);
  }
}

}  // namespace

CutBoundary Phantom::cut_boundary(const CutLine& cut, int first, int last) const {
  cut.validate();
  if (first < 0 || last >= spec_.depth || first > last) throw InvalidArgument("cut boundary slice range out of range");
  const double len = cut.length();
  const Point2 u = (cut.p1 - cut.p0) * (1.0 / len);
  const int max_col = cut.sample_count() - 1;
  std::vector<Pixel> left, right;
  for (int k = first; k <= last; ++k) {
    const auto e = cross_section(k);
    if (!e) throw TopologyError("object does not reach slice " + std::to_string(k), k);
    // |(p0 + t u - c) / r|^2 = 1 in scaled coordinates.
    const Point2 d{(cut.p0.x - e->center.x) / e->rx, (cut.p0.y - e->center.y) / e->ry};
    const Point2 w{u.x / e->rx, u.y / e->ry};
    const double qa = w.x * w.x + w.y * w.y;
    const double qb = 2.0 * (d.x * w.x + d.y * w.y);
    const double qc = d.x * d.x + d.y * d.y - 1.0;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0) throw TopologyError("cut misses the object on slice " + std::to_string(k), k);
    const double t1 = (-qb - std::sqrt(disc)) / (2.0 * qa);
    const double t2 = (-qb + std::sqrt(disc)) / (2.0 * qa);
    auto col = [&](double t) { return std::clamp(static_cast<int>(round_half_up(t)), 0, max_col); };
    left.push_back({col(t1), k});
    right.push_back({col(t2), k});
  }
  std::vector<Pixel> corners = left;
  corners.insert(corners.end(), right.rbegin(), right.rend());
  CutBoundary cb;
  cb.cut = cut;
  cb.polyline.push_back(corners.front());
  for (std::size_t i = 1; i < corners.size(); ++i) append_line(cb.polyline, cb.polyline.back(), corners[i]);
  append_line(cb.polyline, cb.polyline.back(), corners.front());
  cb.polyline.pop_back();
  return cb;
}

std::vector<CutLine> perpendicular_cuts(const Phantom& phantom, double margin) {
  const auto& s = phantom.spec();
  const double reach = std::max(s.radius, s.kind == PhantomKind::Ellipsoid ? s.radius_y : s.radius) + margin;
  const double xmax = s.width - 1.0;
  const double ymax = s.height - 1.0;
  const Point2 c = s.center;
  CutLine horizontal{{std::max(0.0, c.x - reach), c.y}, {std::min(xmax, c.x + reach), c.y}};
  CutLine vertical{{c.x, std::max(0.0, c.y - reach)}, {c.x, std::min(ymax, c.y + reach)}};
  return {horizontal, vertical};
}

TopologySegment analytic_segment(const Phantom& phantom, const std::vector<CutLine>& cuts, int first, int last) {
  TopologySegment seg;
  seg.first = first;
  seg.last = last;
  for (const auto& cut : cuts) seg.cuts.push_back(phantom.cut_boundary(cut, first, last));
  return seg;
}

// Scripted user ----------------------------------------------------------------------

namespace {

Point2 closest_point(std::span<const Point2> line, bool closed, Point2 p) {
  if (line.empty()) throw InvalidArgument("empty ground truth");
  if (line.size() == 1) return line.front();
  const std::size_t segments = closed ? line.size() : line.size() - 1;
  Point2 best = line.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < segments; ++i) {
    const Point2 a = line[i];
    const Point2 b = line[(i + 1) % line.size()];
    const Point2 d = b - a;
    const double l2 = d.x * d.x + d.y * d.y;
    const double t = l2 > 0 ? std::clamp(((p.x - a.x) * d.x + (p.y - a.y) * d.y) / l2, 0.0, 1.0) : 0.0;
    const Point2 q = a + d * t;
    const double dist = distance(p, q);
    if (dist < best_d) {
      best_d = dist;
      best = q;
    }
  }
  return best;
}

Point2 arc_point(std::span<const Point2> line, bool closed, double s) {
  const std::size_t segments = closed ? line.size() : line.size() - 1;
  for (std::size_t i = 0; i < segments; ++i) {
    const Point2 a = line[i];
    const Point2 b = line[(i + 1) % line.size()];
    const double len = distance(a, b);
    if (s <= len || i + 1 == segments) return a + (b - a) * (len > 0 ? std::min(s / len, 1.0) : 0.0);
    s -= len;
  }
  return line.back();
}

double arc_length(std::span<const Point2> line, bool closed) {
  double total = 0.0;
  const std::size_t segments = closed ? line.size() : line.size() - 1;
  for (std::size_t i = 0; i < segments; ++i) total += distance(line[i], line[(i + 1) % line.size()]);
  return total;
}

}  // namespace

double polyline_distance(std::span<const Point2> line, bool closed, Point2 p) {
  return distance(p, closest_point(line, closed, p));
}

RunResult scripted_user(const Phantom& phantom, const UserStrategy& strategy, const std::string& run_id) {
  strategy.weights.validate();
  if (strategy.initial_seeds < 2) throw InvalidArgument("scripted user needs at least 2 initial seeds");
  if (!(strategy.jitter_sigma >= 0)) throw InvalidArgument("jitter sigma must be non-negative");
  if (!(strategy.tolerance > 0)) throw InvalidArgument("tolerance must be positive");

  const auto& spec = phantom.spec();
  const GridSize size{spec.width, spec.height};
  const bool closed = phantom.ground_truth_closed();
  std::mt19937_64 rng(strategy.rng_seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  auto place = [&](Point2 p) {
    if (strategy.jitter_sigma > 0) {
      p.x += strategy.jitter_sigma * jitter(rng);
      p.y += strategy.jitter_sigma * jitter(rng);
    }
    return Pixel{std::clamp(static_cast<int>(round_half_up(p.x)), 0, size.width - 1),
                 std::clamp(static_cast<int>(round_half_up(p.y)), 0, size.height - 1)};
  };

  std::vector<int> slices = strategy.slices;
  if (slices.empty()) {
    for (int k = 0; k < spec.depth; ++k) {
      if (!closed || phantom.cross_section(k)) slices.push_back(k);
    }
  }

  RunResult run;
  run.id = run_id;
  run.contours.spacing = spec.spacing;
  for (int k : slices) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto gt = phantom.ground_truth(k);
    const double total = arc_length(gt, closed);
    const StaticCostField field = static_cost(phantom.volume().slice(k), strategy.weights, strategy.mapping);

    std::vector<Pixel> seeds;
    const int n = strategy.initial_seeds;
    for (int i = 0; i < n; ++i) {
      const double s = closed ? total * i / n : total * i / (n - 1);
      const Pixel p = place(arc_point(gt, closed, s));
      if (seeds.empty() || seeds.back() != p) seeds.push_back(p);
    }
    if (closed && seeds.size() > 1 && seeds.back() == seeds.front()) seeds.pop_back();
    if (seeds.size() < 2) throw InvalidArgument("seeds collapsed onto one pixel on slice " + std::to_string(k));

    std::vector<Polyline> wires;
    std::size_t span = 0;
    bool budget_hit = false;
    auto span_count = [&] { return closed ? seeds.size() : seeds.size() - 1; };
    while (span < span_count()) {
      const Pixel a = seeds[span];
      const Pixel b = seeds[(span + 1) % seeds.size()];
      const PathTree tree = compute_path_tree(field, strategy.weights, a, nullptr, b);
      Polyline wire = reconstruct(tree, b);
      double worst = 0.0;
      Pixel worst_px = a;
      for (Pixel p : wire) {
        // A jittered seed sits off the boundary by itself; judge the wire away from its ends.
        if (chebyshev(p, a) <= 2 || chebyshev(p, b) <= 2) continue;
        const double d = polyline_distance(gt, closed, to_point(p));
        if (d > worst) {
          worst = d;
          worst_px = p;
        }
      }
      if (worst > strategy.tolerance) {
        if (static_cast<int>(seeds.size()) >= strategy.seed_budget) {
          budget_hit = true;
        } else {
          const Pixel fix = place(closest_point(gt, closed, to_point(worst_px)));
          if (fix != a && fix != b && std::find(seeds.begin(), seeds.end(), fix) == seeds.end()) {
            seeds.insert(seeds.begin() + static_cast<std::ptrdiff_t>(span) + 1, fix);
            ++run.auto_corrections;
            continue;
          }
          run.converged = false;
          if (run.message.empty()) {
            run.message = "slice " + std::to_string(k) + ": correction could not improve a wire";
          }
        }
      }
      wires.push_back(std::move(wire));
      ++span;
    }
    if (budget_hit) {
      run.converged = false;
      run.message = "seed budget of " + std::to_string(strategy.seed_budget) + " exhausted on slice " + std::to_string(k);
    }

    Polyline contour;
    for (const auto& w : wires) {
      auto begin = w.begin();
      if (!contour.empty() && contour.back() == w.front()) ++begin;
      contour.insert(contour.end(), begin, w.end());
    }
    if (closed && contour.size() > 1 && contour.back() == contour.front()) contour.pop_back();
    run.seed_points += static_cast<int>(seeds.size());
    run.contours.slices.push_back({k, std::move(contour)});
    run.slice_millis.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  if (!run.contours.slices.empty()) {
    // Consecutive slices form one range each.
    for (const auto& s : run.contours.slices) {
      auto& segs = run.contours.segments;
      if (!segs.empty() && segs.back().second + 1 == s.index) {
        segs.back().second = s.index;
      } else {
        segs.emplace_back(s.index, s.index);
      }
    }
  }
  return run;
}

std::string run_to_json(const RunResult& run) {
  json doc = {{"id", run.id},
              {"seed_points", run.seed_points},
              {"auto_corrections", run.auto_corrections},
              {"converged", run.converged},
              {"message", run.message},
              {"slice_millis", run.slice_millis},
              {"contours", json::parse(contours_to_json(run.contours))}};
  return doc.dump() + "\n";
}

RunResult run_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(e.what(), "byte offset " + std::to_string(e.byte));
  }
  RunResult run;
  if (!doc.is_object() || !doc.contains("contours")) {
    run.contours = contours_from_json(text);
    return run;
  }
  try {
    run.id = doc.value("id", std::string{});
    run.seed_points = doc.value("seed_points", 0);
    run.auto_corrections = doc.value("auto_corrections", 0);
    run.converged = doc.value("converged", true);
    run.message = doc.value("message", std::string{});
    if (doc.contains("slice_millis")) run.slice_millis = doc.at("slice_millis").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("schema violation: ") + e.what(), "run");
  }
  run.contours = contours_from_json(doc.at("contours").dump());
  return run;
}

}  // namespace livewire
