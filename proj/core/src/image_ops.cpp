#include "livewire/image_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace livewire {

namespace {

void require_min_size(const Image& img) {
  if (img.width() < 3 || img.height() < 3) throw InvalidArgument("image must be at least 3x3");
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(round_half_up(v), 0.0, 255.0)); }

struct Box {
  int x0, y0, x1, y1;  // inclusive
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

RealImage to_real(const Image& img) {
  RealImage out(img.size());
  std::copy(img.values().begin(), img.values().end(), out.values().begin());
  return out;
}

RealImage diffuse(const Image& src, const AnisotropicDiffusion& p) {
  RealImage cur = to_real(src);
  RealImage next(cur.size());
  const double inv_k2 = 1.0 / (p.kappa * p.kappa);
  auto conductance = [inv_k2](double s) { return 1.0 / (1.0 + s * s * inv_k2); };
  for (int it = 0; it < p.iterations; ++it) {
    for (int y = 0; y < cur.height(); ++y) {
      for (int x = 0; x < cur.width(); ++x) {
        const double c = cur(x, y);
        const double dn = cur.clamped(x, y - 1) - c;
        const double ds = cur.clamped(x, y + 1) - c;
        const double de = cur.clamped(x + 1, y) - c;
        const double dw = cur.clamped(x - 1, y) - c;
        next(x, y) = c + p.step * (conductance(dn) * dn + conductance(ds) * ds + conductance(de) * de +
                                   conductance(dw) * dw);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

Image contrast(const Image& src, const ContrastStretch& p) {
  std::array<std::uint8_t, 256> lut{};
  const double lo = sigmoid(p.slope * (0.0 - p.center) / 255.0);
  const double hi = sigmoid(p.slope * (255.0 - p.center) / 255.0);
  for (int v = 0; v < 256; ++v) {
    lut[v] = quantize(255.0 * (sigmoid(p.slope * (v - p.center) / 255.0) - lo) / (hi - lo));
  }
  Image out(src.size());
  std::transform(src.values().begin(), src.values().end(), out.values().begin(), [&](std::uint8_t v) { return lut[v]; });
  return out;
}

Image equalize(const Image& src) {
  std::array<std::size_t, 256> hist{};
  for (auto v : src.values()) ++hist[v];
  std::array<std::size_t, 256> cdf{};
  std::size_t run = 0;
  std::size_t cdf_min = 0;
  for (int v = 0; v < 256; ++v) {
    run += hist[v];
    cdf[v] = run;
    if (cdf_min == 0 && run > 0) cdf_min = run;
  }
  const std::size_t total = src.values().size();
  Image out(src.size());
  if (total == cdf_min) {  // single-valued image has nothing to spread
    return src;
  }
  std::array<std::uint8_t, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    double num = cdf[v] >= cdf_min ? static_cast<double>(cdf[v] - cdf_min) : 0.0;
    lut[v] = quantize(255.0 * num / static_cast<double>(total - cdf_min));
  }
  std::transform(src.values().begin(), src.values().end(), out.values().begin(), [&](std::uint8_t v) { return lut[v]; });
  return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& w : k) w /= sum;
  return k;
}

Image unsharp(const Image& src, const UnsharpMask& p) {
  const int radius = *influence_radius(p);
  const auto kernel = gaussian_kernel(p.sigma, radius);
  RealImage in = to_real(src);
  RealImage horiz(in.size());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * in.clamped(x + i, y);
      horiz(x, y) = acc;
    }
  }
  Image out(src.size());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      double blurred = 0.0;
      for (int i = -radius; i <= radius; ++i) blurred += kernel[i + radius] * horiz.clamped(x, y + i);
      const double v = in(x, y);
      out(x, y) = quantize(v + p.amount * (v - blurred));
    }
  }
  return out;
}

Image filter_whole(const Image& img, const FilterSpec& spec) {
  return std::visit(overloaded{
                        [&](const AnisotropicDiffusion& p) {
                          RealImage r = diffuse(img, p);
                          Image out(img.size());
                          std::transform(r.values().begin(), r.values().end(), out.values().begin(), quantize);
                          return out;
                        },
                        [&](const ContrastStretch& p) { return contrast(img, p); },
                        [&](const HistogramEqualization&) { return equalize(img); },
                        [&](const UnsharpMask& p) { return unsharp(img, p); },
                    },
                    spec);
}

Image crop(const Image& img, const Box& b) {
  Image out(b.x1 - b.x0 + 1, b.y1 - b.y0 + 1);
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) out(x - b.x0, y - b.y0) = img(x, y);
  return out;
}

}  // namespace

ScalarField gradient_magnitude(const Image& img) {
  require_min_size(img);
  ScalarField f{RealImage(img.size()), 0.0};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto I = [&](int dx, int dy) { return static_cast<double>(img.clamped(x + dx, y + dy)); };
      const double gx = (I(1, -1) + 2.0 * I(1, 0) + I(1, 1)) - (I(-1, -1) + 2.0 * I(-1, 0) + I(-1, 1));
      const double gy = (I(-1, 1) + 2.0 * I(0, 1) + I(1, 1)) - (I(-1, -1) + 2.0 * I(0, -1) + I(1, -1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      f.values(x, y) = mag;
      f.max_value = std::max(f.max_value, mag);
    }
  }
  return f;
}

RealImage laplacian(const Image& img) {
  require_min_size(img);
  RealImage lap(img.size());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      lap(x, y) = static_cast<double>(img.clamped(x - 1, y)) + img.clamped(x + 1, y) + img.clamped(x, y - 1) +
                  img.clamped(x, y + 1) - 4.0 * img(x, y);
    }
  }
  return lap;
}

Mask laplacian_zero_crossings(const Image& img) {
  const RealImage lap = laplacian(img);
  Mask mask(img.size());
  constexpr Pixel cross[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double v = lap(x, y);
      bool flag = false;
      bool has_pos = false;
      bool has_neg = false;
      for (Pixel d : cross) {
        if (!lap.contains(x + d.x, y + d.y)) continue;
        const double n = lap(x + d.x, y + d.y);
        has_pos |= n > 0.0;
        has_neg |= n < 0.0;
        if (v * n < 0.0) {
          const double a = std::abs(v);
          const double b = std::abs(n);
          if (a < b || (a == b && v > 0.0)) flag = true;
        }
      }
      if (v == 0.0) flag = has_pos && has_neg;
      mask.set(x, y, flag);
    }
  }
  return mask;
}

// Lines ----------------------------------------------------------------------

Point2 CutLine::at(double arc) const {
  const double len = length();
  if (len == 0.0) return p0;
  return p0 + (p1 - p0) * (arc / len);
}

void CutLine::validate() const {
  if (!(length() >= 2.0)) throw InvalidArgument("cut line must be at least 2 px long");
}

double bilinear(const Image& img, Point2 p) {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= img.width() - 1 && p.y <= img.height() - 1)) {
    throw InvalidArgument("sample point outside image");
  }
  int x0 = std::min(static_cast<int>(std::floor(p.x)), img.width() - 2);
  int y0 = std::min(static_cast<int>(std::floor(p.y)), img.height() - 2);
  const double fx = p.x - x0;
  const double fy = p.y - y0;
  const double top = (1.0 - fx) * img(x0, y0) + fx * img(x0 + 1, y0);
  const double bottom = (1.0 - fx) * img(x0, y0 + 1) + fx * img(x0 + 1, y0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

std::vector<double> sample_line(const Image& img, const CutLine& cut) {
  auto inside = [&](Point2 p) { return p.x >= 0.0 && p.y >= 0.0 && p.x <= img.width() - 1 && p.y <= img.height() - 1; };
  if (!inside(cut.p0) || !inside(cut.p1)) throw InvalidArgument("cut endpoint outside image bounds");
  const int n = cut.sample_count();
  std::vector<double> samples(n);
  for (int i = 0; i < n; ++i) samples[i] = bilinear(img, cut.at(i));
  return samples;
}

Image build_orthogonal_cut(const Volume& v, const CutLine& cut) {
  cut.validate();
  Image out(cut.sample_count(), v.depth());
  for (int k = 0; k < v.depth(); ++k) {
    const auto profile = sample_line(v.slice(k), cut);
    for (int i = 0; i < out.width(); ++i) out(i, k) = quantize(profile[i]);
  }
  return out;
}

// Filters ----------------------------------------------------------------------

std::optional<int> influence_radius(const FilterSpec& spec) {
  return std::visit(overloaded{
                        [](const AnisotropicDiffusion& p) -> std::optional<int> { return p.iterations; },
                        [](const ContrastStretch&) -> std::optional<int> { return 0; },
                        [](const HistogramEqualization&) -> std::optional<int> { return std::nullopt; },
                        [](const UnsharpMask& p) -> std::optional<int> {
                          return static_cast<int>(std::ceil(3.0 * p.sigma - 1e-12));
                        },
                    },
                    spec);
}

void validate(const FilterSpec& spec) {
  std::visit(overloaded{
                 [](const AnisotropicDiffusion& p) {
                   if (p.iterations < 0 || p.iterations > 100) throw InvalidArgument("iterations must be in [0,100]");
                   if (!(p.kappa > 0.0 && p.kappa <= 255.0)) throw InvalidArgument("kappa must be in (0,255]");
                   if (!(p.step > 0.0 && p.step <= 0.25)) throw InvalidArgument("step must be in (0,0.25]");
                 },
                 [](const ContrastStretch& p) {
                   if (!(p.center >= 0.0 && p.center <= 255.0)) throw InvalidArgument("center must be in [0,255]");
                   if (!(p.slope > 0.0 && p.slope <= 1000.0)) throw InvalidArgument("slope must be in (0,1000]");
                 },
                 [](const HistogramEqualization&) {},
                 [](const UnsharpMask& p) {
                   if (!(p.amount >= 0.0 && p.amount <= 100.0)) throw InvalidArgument("amount must be in [0,100]");
                   if (!(p.sigma > 0.0 && p.sigma <= 50.0)) throw InvalidArgument("sigma must be in (0,50]");
                 },
             },
             spec);
}

FilterSpec make_filter(const std::string& kind, const std::vector<std::pair<std::string, double>>& params) {
  auto reject = [&](const std::string& key) {
    throw InvalidArgument("unknown parameter '" + key + "' for filter " + kind);
  };
  FilterSpec spec;
  if (kind == "anisotropic_diffusion" || kind == "anisotropic" || kind == "diffusion") {
    AnisotropicDiffusion p;
    for (const auto& [k, v] : params) {
      if (k == "iterations") {
        if (v != std::floor(v)) throw InvalidArgument("iterations must be an integer");
        p.iterations = static_cast<int>(v);
      } else if (k == "kappa" || k == "K") {
        p.kappa = v;
      } else if (k == "step") {
        p.step = v;
      } else {
        reject(k);
      }
    }
    spec = p;
  } else if (kind == "contrast") {
    ContrastStretch p;
    for (const auto& [k, v] : params) {
      if (k == "center") p.center = v;
      else if (k == "slope") p.slope = v;
      else reject(k);
    }
    spec = p;
  } else if (kind == "histogram_eq" || kind == "histogram") {
    if (!params.empty()) reject(params.front().first);
    spec = HistogramEqualization{};
  } else if (kind == "unsharp_mask" || kind == "unsharp") {
    UnsharpMask p;
    for (const auto& [k, v] : params) {
      if (k == "amount") p.amount = v;
      else if (k == "sigma") p.sigma = v;
      else reject(k);
    }
    spec = p;
  } else {
    throw InvalidArgument("unknown filter kind '" + kind + "'");
  }
  validate(spec);
  return spec;
}

Image apply_filter(const Image& img, const FilterSpec& spec, const Mask* region) {
  validate(spec);
  if (region == nullptr) return filter_whole(img, spec);

  const auto radius = influence_radius(spec);
  if (!radius) throw InvalidArgument("filter reads the whole image and cannot be restricted to a region");
  if (region->size() != img.size()) throw InvalidArgument("region mask does not match image dimensions");

  Box box{img.width(), img.height(), -1, -1};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!region->test(x, y)) continue;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x);
      box.y1 = std::max(box.y1, y);
    }
  }
  Image out = img;
  if (box.x1 < 0) return out;
  box = {std::max(0, box.x0 - *radius), std::max(0, box.y0 - *radius), std::min(img.width() - 1, box.x1 + *radius),
         std::min(img.height() - 1, box.y1 + *radius)};
  const Image filtered = filter_whole(crop(img, box), spec);
  for (int y = box.y0; y <= box.y1; ++y) {
    for (int x = box.x0; x <= box.x1; ++x) {
      if (region->test(x, y)) out(x, y) = filtered(x - box.x0, y - box.y0);
    }
  }
  return out;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius < 0) throw InvalidArgument("dilation radius must be non-negative");
  if (radius == 0) return mask;
  // Separable Chebyshev dilation: rows then columns.
  Mask rows(mask.size());
  for (int y = 0; y < mask.height(); ++y) {
    int last = -1'000'000;
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.test(x, y)) last = x;
      if (x - last <= radius) rows.set(x, y);
    }
    last = 1'000'000;
    for (int x = mask.width() - 1; x >= 0; --x) {
      if (mask.test(x, y)) last = x;
      if (last - x <= radius) rows.set(x, y);
    }
  }
  Mask out(mask.size());
  for (int x = 0; x < mask.width(); ++x) {
    int last = -1'000'000;
    for (int y = 0; y < mask.height(); ++y) {
      if (rows.test(x, y)) last = y;
      if (y - last <= radius) out.set(x, y);
    }
    last = 1'000'000;
    for (int y = mask.height() - 1; y >= 0; --y) {
      if (rows.test(x, y)) last = y;
      if (last - y <= radius) out.set(x, y);
    }
  }
  return out;
}

Mask rasterize_line(GridSize size, const CutLine& cut) {
  Mask m(size);
  Pixel a{static_cast<int>(round_half_up(cut.p0.x)), static_cast<int>(round_half_up(cut.p0.y))};
  Pixel b{static_cast<int>(round_half_up(cut.p1.x)), static_cast<int>(round_half_up(cut.p1.y))};
  int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (m.contains(a)) m.set(a);
    if (a == b) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      a.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      a.y += sy;
    }
  }
  return m;
}

}  // namespace livewire
