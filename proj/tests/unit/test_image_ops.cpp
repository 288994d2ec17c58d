#include <cmath>
#include <random>

#include "doctest.h"
#include "livewire/image_ops.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

Image random_image(int w, int h, std::mt19937_64& rng) {
  Image img(w, h);
  for (auto& b : img.values()) b = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

// Documented crossing rule, restated over the oracle Laplacian.
Mask crossing_oracle(const Image& img) {
  const auto lap = oracle::laplacian4(img);
  const int w = img.width(), h = img.height();
  Mask m(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = lap[y * w + x];
      bool pos = false, neg = false, flag = false;
      const int nx[4] = {x + 1, x - 1, x, x};
      const int ny[4] = {y, y, y + 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const double n = lap[ny[k] * w + nx[k]];
        pos = pos || n > 0;
        neg = neg || n < 0;
        if ((v > 0 && n < 0) || (v < 0 && n > 0)) {
          if (std::abs(v) < std::abs(n) || (std::abs(v) == std::abs(n) && v > 0)) flag = true;
        }
      }
      if (v == 0) flag = pos && neg;
      if (flag) m.set(x, y);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("gradient of a constant image is zero") {
  Image img(6, 5, 42);
  const auto g = gradient_magnitude(img);
  CHECK(g.max_value == 0.0);
  for (double v : g.values.values()) CHECK(v == 0.0);
}

TEST_CASE("vertical step has its maximum on the step and identical rows") {
  Image img(8, 6, 0);
  for (int y = 0; y < 6; ++y)
    for (int x = 4; x < 8; ++x) img(x, y) = 255;
  const auto g = gradient_magnitude(img);
  CHECK(g.values(3, 2) == g.max_value);
  CHECK(g.values(4, 2) == g.max_value);
  for (int y = 1; y < 6; ++y)
    for (int x = 0; x < 8; ++x) CHECK(g.values(x, y) == g.values(x, 0));
}

TEST_CASE("ramp gradient is uniform 80 in the interior") {
  Image img(5, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) img(x, y) = static_cast<std::uint8_t>(10 * x);
  const auto g = gradient_magnitude(img);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 4; ++x) CHECK(g.values(x, y) == doctest::Approx(80.0));
}

TEST_CASE("gradient and laplacian match the hand convolution on random images") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Image img = random_image(3 + t, 4 + t % 3, rng);
    const auto g = gradient_magnitude(img);
    const auto lap = laplacian(img);
    const auto go = oracle::sobel_magnitude(img);
    const auto lo = oracle::laplacian4(img);
    double mx = 0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        CHECK(g.values(x, y) == doctest::Approx(go[y * img.width() + x]));
        CHECK(lap(x, y) == lo[y * img.width() + x]);
        mx = std::max(mx, go[y * img.width() + x]);
        CHECK(g.values(x, y) >= 0.0);
      }
    }
    CHECK(g.max_value == doctest::Approx(mx));
  }
}

TEST_CASE("images smaller than 3x3 are rejected") {
  CHECK_THROWS_AS(gradient_magnitude(Image(2, 5)), InvalidArgument);
  CHECK_THROWS_AS(laplacian_zero_crossings(Image(5, 2)), InvalidArgument);
}

TEST_CASE("constant image has no zero crossings") {
  CHECK(laplacian_zero_crossings(Image(7, 7, 99)).empty());
}

TEST_CASE("column step flags exactly one column next to it") {
  Image img(10, 6, 20);
  for (int y = 0; y < 6; ++y)
    for (int x = 5; x < 10; ++x) img(x, y) = 200;
  const Mask m = laplacian_zero_crossings(img);
  for (int y = 0; y < 6; ++y) {
    int flagged = 0;
    for (int x = 0; x < 10; ++x) flagged += m.test(x, y);
    CHECK(flagged == 1);
    CHECK((m.test(4, y) || m.test(5, y)));
  }
}

TEST_CASE("single bright pixel gives a ring of crossings") {
  Image img(9, 9, 10);
  img(4, 4) = 200;
  const Mask m = laplacian_zero_crossings(img);
  CHECK(m == crossing_oracle(img));
  CHECK_FALSE(m.test(4, 4));
  CHECK(m.test(3, 4));
  CHECK(m.test(5, 4));
  CHECK(m.test(4, 3));
  CHECK(m.test(4, 5));
}

TEST_CASE("zero crossings follow the stated rule on random images") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const Image img = random_image(8, 7, rng);
    CHECK(laplacian_zero_crossings(img) == crossing_oracle(img));
  }
}

TEST_CASE("sample_line") {
  SUBCASE("constant image") {
    const Image img(10, 10, 9);
    for (double s : sample_line(img, {{1, 2}, {8, 2}})) CHECK(s == 9.0);
  }
  SUBCASE("axis aligned through centres is exact") {
    std::mt19937_64 rng(2);
    const Image img = random_image(10, 10, rng);
    const auto s = sample_line(img, {{0, 3}, {9, 3}});
    REQUIRE(s.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(s[i] == img(i, 3));
  }
  SUBCASE("diagonal on a ramp increases linearly") {
    Image img(12, 12);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) img(x, y) = static_cast<std::uint8_t>(10 * x);
    const CutLine cut{{1, 1}, {10, 10}};
    const auto s = sample_line(img, cut);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i] == doctest::Approx(10.0 * (1.0 + i / std::sqrt(2.0))));
    }
  }
  SUBCASE("endpoint outside") { CHECK_THROWS_AS(sample_line(Image(5, 5), {{0, 0}, {5, 0}}), InvalidArgument); }
}

TEST_CASE("orthogonal cut") {
  SUBCASE("depth 1 equals the quantized profile") {
    Volume v(9, 9, 1);
    std::mt19937_64 rng(4);
    for (auto& b : v.voxels()) b = static_cast<std::uint8_t>(rng() & 0xff);
    const CutLine cut{{0, 4}, {8, 4}};
    const Image c = build_orthogonal_cut(v, cut);
    REQUIRE(c.height() == 1);
    const auto p = sample_line(v.slice(0), cut);
    for (int i = 0; i < c.width(); ++i) CHECK(c(i, 0) == p[i]);
  }
  SUBCASE("slice k valued k gives constant rows") {
    Volume v(6, 6, 5);
    for (int k = 0; k < 5; ++k)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) v.at(x, y, k) = static_cast<std::uint8_t>(k);
    const Image c = build_orthogonal_cut(v, {{0, 0}, {5, 5}});
    for (int k = 0; k < 5; ++k)
      for (int i = 0; i < c.width(); ++i) CHECK(c(i, k) == k);
  }
  SUBCASE("too short") { CHECK_THROWS_AS(build_orthogonal_cut(Volume(6, 6, 2), {{1, 1}, {2, 1}}), InvalidArgument); }
}

TEST_CASE("filter identities") {
  std::mt19937_64 rng(8);
  const Image img = random_image(16, 12, rng);
  CHECK(apply_filter(img, UnsharpMask{0.0, 1.5}) == img);
  CHECK(apply_filter(img, AnisotropicDiffusion{0, 20.0, 0.2}) == img);
}

TEST_CASE("histogram equalization keeps a balanced two-valued image") {
  Image img(8, 8, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img(x, y) = 255;
  CHECK(apply_filter(img, HistogramEqualization{}) == img);
}

TEST_CASE("contrast stretch is monotone") {
  Image img(16, 16);
  for (int i = 0; i < 256; ++i) img.values()[i] = static_cast<std::uint8_t>(i);
  const Image out = apply_filter(img, ContrastStretch{128, 10});
  for (int i = 1; i < 256; ++i) CHECK(out.values()[i] >= out.values()[i - 1]);
}

TEST_CASE("region filtering matches the whole-image result inside the region") {
  std::mt19937_64 rng(12);
  const Image img = random_image(24, 20, rng);
  Mask region(img.size());
  for (int y = 6; y < 12; ++y)
    for (int x = 8; x < 15; ++x) region.set(x, y);
  region.set(0, 0);
  for (const FilterSpec spec : {FilterSpec{AnisotropicDiffusion{4, 15.0, 0.2}}, FilterSpec{UnsharpMask{1.2, 1.0}},
                                FilterSpec{ContrastStretch{100, 8}}}) {
    const Image whole = apply_filter(img, spec);
    const Image part = apply_filter(img, spec, &region);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) CHECK(part(x, y) == (region.test(x, y) ? whole(x, y) : img(x, y)));
  }
  CHECK_THROWS_AS(apply_filter(img, HistogramEqualization{}, &region), InvalidArgument);
}

TEST_CASE("make_filter parses parameters and rejects unknown keys") {
  const auto f = make_filter("unsharp_mask", {{"amount", 0.5}, {"sigma", 2.0}});
  REQUIRE(std::holds_alternative<UnsharpMask>(f));
  CHECK(std::get<UnsharpMask>(f).amount == 0.5);
  CHECK_THROWS_AS(make_filter("unsharp_mask", {{"radius", 3}}), InvalidArgument);
  CHECK_THROWS_AS(make_filter("sharpen", {}), InvalidArgument);
  CHECK_THROWS_AS(validate(FilterSpec{AnisotropicDiffusion{-1, 20, 0.2}}), InvalidArgument);
}

TEST_CASE("dilate is a Chebyshev dilation") {
  Mask m(9, 9);
  m.set(4, 4);
  const Mask d = dilate(m, 2);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) CHECK(d.test(x, y) == (std::abs(x - 4) <= 2 && std::abs(y - 4) <= 2));
}
