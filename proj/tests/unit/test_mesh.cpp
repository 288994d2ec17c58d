#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "livewire/mesh.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

std::vector<Point2> circle(Point2 c, double r, int n, double phase = 0.0) {
  std::vector<Point2> out;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2 * std::numbers::pi * i / n;
    out.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return out;
}

Polyline pixel_circle(Point2 c, double r) {
  Polyline out;
  for (int i = 0; i < 360; ++i) {
    const double a = 2 * std::numbers::pi * i / 360;
    const Pixel p{int(std::floor(c.x + r * std::cos(a) + 0.5)), int(std::floor(c.y + r * std::sin(a) + 0.5))};
    if (out.empty() || out.back() != p) out.push_back(p);
  }
  while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  return out;
}

double cyc_arc(double a, double b, double L) {
  const double d = std::fmod(std::abs(a - b), L);
  return std::min(d, L - d);
}

}  // namespace

TEST_CASE("resample a square from a corner") {
  const std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto s = resample(sq, 4, 0);
  CHECK(s.circumference == doctest::Approx(4.0));
  REQUIRE(s.points.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(s.points[i].x == doctest::Approx(sq[i].x));
    CHECK(s.points[i].y == doctest::Approx(sq[i].y));
  }
}

TEST_CASE("resample an equilateral triangle at its vertices") {
  const std::vector<Point2> tri{{0, 0}, {2, 0}, {1, std::sqrt(3.0)}};
  const auto s = resample(tri, 3, 0);
  for (int i = 0; i < 3; ++i) CHECK(distance(s.points[i], tri[i]) < 1e-9);
}

TEST_CASE("resample a circle at 45 degree spacing") {
  const Point2 c{20, 20};
  const auto poly = circle(c, 10, 720);
  const auto s = resample(poly, 8, 0);
  for (int i = 0; i < 8; ++i) {
    const double a = 2 * std::numbers::pi * i / 8;
    CHECK(distance(s.points[i], {c.x + 10 * std::cos(a), c.y + 10 * std::sin(a)}) < 0.5);
  }
  CHECK(s.centroid.x == doctest::Approx(20.0));
}

TEST_CASE("resampled points are equally spaced along the contour") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rad(6.0, 14.0);
  std::vector<Point2> star;
  for (int i = 0; i < 12; ++i) {
    const double a = 2 * std::numbers::pi * i / 12;
    const double r = rad(rng);
    star.push_back({30 + r * std::cos(a), 30 + r * std::sin(a)});
  }
  const auto s = resample(star, 40);
  REQUIRE(s.points.size() == 40);
  // Every sample lies on the polygon.
  for (Point2 p : s.points) {
    double best = 1e9;
    for (std::size_t i = 0; i < star.size(); ++i) {
      const Point2 a = star[i], b = star[(i + 1) % star.size()];
      const Point2 ab = b - a;
      const double t = std::clamp(((p - a).x * ab.x + (p - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y), 0.0, 1.0);
      best = std::min(best, distance(p, a + ab * t));
    }
    CHECK(best < 1e-9);
  }
}

TEST_CASE("convex start vertex picks the sharpest corner") {
  const std::vector<Point2> kite{{0, 0}, {4, -1}, {10, 0}, {4, 1}};
  CHECK(convex_start_vertex(kite) == 2);
  const std::vector<Point2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(convex_start_vertex(sq) == 0);
}

TEST_CASE("normalize_next transforms") {
  const auto prev_poly = circle({20, 20}, 8, 64);
  const auto prev = resample(prev_poly, 32, 0);
  SUBCASE("translation") {
    std::vector<Point2> next;
    for (Point2 p : prev_poly) next.push_back(p + Point2{5, 0});
    const auto n = normalize_next(prev, next);
    CHECK(n.forward.scale == doctest::Approx(1.0));
    CHECK(n.forward.translation().x == doctest::Approx(-5.0));
    CHECK(n.forward.translation().y == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("scaled by 2") {
    std::vector<Point2> next;
    for (Point2 p : prev_poly) next.push_back(Point2{20, 20} + (p - Point2{20, 20}) * 2.0);
    CHECK(normalize_next(prev, next).forward.scale == doctest::Approx(0.5));
  }
  SUBCASE("identity") {
    const auto n = normalize_next(prev, prev_poly);
    CHECK(n.forward.scale == doctest::Approx(1.0));
    for (std::size_t i = 0; i < prev_poly.size(); ++i) CHECK(distance(n.points[i], prev_poly[i]) < 1e-9);
    const Point2 q = n.inverse().apply(n.forward.apply({3, 4}));
    CHECK(q.x == doctest::Approx(3.0));
  }
}

TEST_CASE("correspondence") {
  const Point2 c{30, 30};
  const auto prev = resample(circle(c, 10, 720), 32, 0);
  const double L = prev.circumference;
  SUBCASE("identical contour") {
    const auto k = correspond(prev, prev.points, 2 * L / 32);
    for (int i = 0; i < 32; ++i) CHECK(distance(k.points[i], prev.points[i]) < 1e-6);
  }
  SUBCASE("rotated by half a spacing") {
    const double half = std::numbers::pi / 32;
    const auto rotated = circle(c, 10, 720, half);
    const auto k = correspond(prev, rotated, 2 * L / 32);
    const double spacing = L / 32;
    for (int i = 0; i < 32; ++i) {
      const double a_prev = std::atan2(prev.points[i].y - c.y, prev.points[i].x - c.x);
      const double a_k = std::atan2(k.points[i].y - c.y, k.points[i].x - c.x);
      CHECK(cyc_arc(a_prev * 10, a_k * 10, L) <= spacing / 2 + 1e-6);
    }
    for (std::size_t i = 1; i < k.arcs.size(); ++i) CHECK(k.arcs[i] > k.arcs[i - 1]);
  }
  SUBCASE("concentric circles after normalization") {
    const auto big = circle(c, 12, 720);
    const auto n = normalize_next(prev, big);
    const auto k = correspond(prev, n.points, 2 * L / 32);
    for (int i = 0; i < 32; ++i) {
      const Point2 back = n.inverse().apply(k.points[i]);
      const Point2 radial = c + (prev.points[i] - c) * 1.2;
      CHECK(distance(back, radial) < 1.0);
    }
  }
  SUBCASE("bad window") {
    CHECK_THROWS_AS(correspond(prev, prev.points, 0.0), InvalidArgument);
    CHECK_THROWS_AS(correspond(prev, prev.points, L), InvalidArgument);
  }
}

TEST_CASE("band triangle counts and pattern") {
  CHECK(build_band(3).size() == 6);
  const auto b = build_band(4);
  REQUIRE(b.size() == 8);
  CHECK(b[0] == Triangle{{0, 1, 4}});
  CHECK(b[1] == Triangle{{1, 5, 4}});
  CHECK_THROWS_AS(build_band(2), InvalidArgument);
}

TEST_CASE("two squares give the 8-triangle prism band") {
  ContourSet cs;
  cs.segments = {{0, 1}};
  cs.slices.push_back({0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  cs.slices.push_back({1, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  const Mesh m = reconstruct(cs, {4, {}});
  CHECK(m.vertices.size() == 8);
  CHECK(m.triangles.size() == 8);
  const auto obj = oracle::parse_obj(to_obj(m));
  CHECK(obj.faces.size() == 8);
  const auto check = oracle::check_mesh(obj);
  CHECK(check.edge_manifold);
  CHECK(check.non_degenerate);
  CHECK(check.boundary_edges == 8);
  for (const auto& v : m.vertices) {
    CHECK(((v.x == 0 || v.x == 4) && (v.y == 0 || v.y == 4)));
    CHECK((v.z == 0 || v.z == 1));
  }
}

TEST_CASE("cylinder stack") {
  ContourSet cs;
  cs.spacing = 1.0;
  cs.segments = {{0, 7}};
  for (int k = 0; k < 8; ++k) cs.slices.push_back({k, pixel_circle({32, 32}, 12)});
  const Mesh m = reconstruct(cs, {64, {}});
  CHECK(m.triangles.size() == 2u * 64 * 7);
  CHECK(m.bands.size() == 7);
  for (const auto& v : m.vertices) CHECK(std::abs(std::hypot(v.x - 32, v.y - 32) - 12.0) <= 1.0);
  const auto check = oracle::check_mesh(oracle::parse_obj(to_obj(m)));
  CHECK(check.edge_manifold);
  CHECK(check.indices_in_range);
  CHECK(check.non_degenerate);
  CHECK(check.boundary_edges == 2u * 64);
}

TEST_CASE("shrinking rings stay monotone") {
  ContourSet cs;
  cs.segments = {{0, 5}};
  for (int k = 0; k < 6; ++k) cs.slices.push_back({k, pixel_circle({32, 32}, 14 - 1.5 * k)});
  const Mesh m = reconstruct(cs, {32, {}});
  for (int k = 0; k + 1 < 6; ++k) {
    double r_hi = 0, r_lo = 1e9;
    for (int i = 0; i < 32; ++i) {
      const auto& a = m.vertices[k * 32 + i];
      const auto& b = m.vertices[(k + 1) * 32 + i];
      r_hi = std::max(r_hi, std::hypot(b.x - 32, b.y - 32));
      r_lo = std::min(r_lo, std::hypot(a.x - 32, a.y - 32));
    }
    CHECK(r_hi < r_lo);
  }
  CHECK(oracle::check_mesh(oracle::parse_obj(to_obj(m))).edge_manifold);
}

TEST_CASE("segments inferred from consecutive slices and spacing sets z") {
  ContourSet cs;
  cs.spacing = 2.5;
  for (int k : {0, 1, 4, 5}) cs.slices.push_back({k, {{0, 0}, {6, 0}, {6, 6}, {0, 6}}});
  const Mesh m = reconstruct(cs, {8, {}});
  CHECK(m.bands.size() == 2);
  CHECK(m.vertices.back().z == doctest::Approx(12.5));
}

TEST_CASE("obj header records parameters") {
  ContourSet cs;
  cs.segments = {{0, 1}};
  cs.slices.push_back({0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  cs.slices.push_back({1, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  const std::string obj = to_obj(reconstruct(cs, {4, {}}));
  CHECK(obj.rfind("# livewire band mesh\n", 0) == 0);
  CHECK(obj.find("# samples 4") != std::string::npos);
  CHECK(obj == to_obj(reconstruct(cs, {4, {}})));
}

TEST_CASE("degenerate contour raises a mesh error naming the slice") {
  ContourSet cs;
  cs.segments = {{0, 1}};
  cs.slices.push_back({0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  cs.slices.push_back({1, {{1, 1}, {2, 2}}});
  try {
    reconstruct(cs, {4, {}});
    FAIL("expected MeshError");
  } catch (const MeshError& e) {
    CHECK(e.slice() == 1);
  }
}
