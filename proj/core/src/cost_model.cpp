#include "livewire/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace livewire {

void CostWeights::validate() const {
  for (double w : {gradient, laplacian, direction, deviation}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("cost weights must be finite and non-negative");
  }
  if (gradient + laplacian <= 0.0) throw InvalidArgument("at least one base feature weight must be positive");
  if (gradient > 0.0 && laplacian > 0.0 && std::abs(gradient + laplacian - 1.0) > 1e-9) {
    throw InvalidArgument("w_G + w_L must equal 1 when both base features are active");
  }
  for (double d : direction_table) {
    if (!(d >= 0.0)) throw InvalidArgument("direction penalties must be non-negative");
  }
}

PathStats PathStats::with(double value) const {
  PathStats s = *this;
  ++s.count;
  const double delta = value - s.mean;
  s.mean += delta / s.count;
  s.m2 += delta * (value - s.mean);
  return s;
}

int gradient_feature(double grad, double grad_max) {
  if (grad_max <= 0.0) return 255;
  if (grad < 0.0 || grad > grad_max) throw InvalidArgument("gradient outside [0, grad_max]");
  return static_cast<int>(round_half_up(255.0 * (1.0 - grad / grad_max)));
}

int gradient_bin(double grad, double grad_max) {
  if (grad_max <= 0.0) return 0;
  return std::clamp(static_cast<int>(round_half_up(255.0 * grad / grad_max)), 0, 255);
}

StaticCostField static_cost(const Image& img, const CostWeights& weights, const TrainedMapping* mapping) {
  weights.validate();
  const ScalarField grad = gradient_magnitude(img);
  const Mask crossings = laplacian_zero_crossings(img);
  StaticCostField field{Grid<std::uint8_t>(img.size()), Grid<std::uint8_t>(img.size())};
  const double base_sum = weights.gradient + weights.laplacian;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double g = grad.values(x, y);
      const int bin = gradient_bin(g, grad.max_value);
      const int f_l = laplacian_feature(crossings.test(x, y));
      double cost;
      if (mapping) {
        const double trained = 255.0 - mapping->table[bin];
        cost = (weights.gradient * trained + weights.laplacian * f_l) / base_sum;
      } else {
        cost = weights.gradient * gradient_feature(g, grad.max_value) + weights.laplacian * f_l;
      }
      field.cost(x, y) = static_cast<std::uint8_t>(std::clamp(round_half_up(cost), 0.0, 255.0));
      field.feature(x, y) = static_cast<std::uint8_t>(bin);
    }
  }
  return field;
}

int turn_index(int dir_in, int dir_out) {
  if (dir_in < 0 || dir_in > 7 || dir_out < 0 || dir_out > 7) throw InvalidArgument("direction must be in [0,7]");
  const int d = std::abs(dir_in - dir_out) % 8;
  return std::min(d, 8 - d);
}

double direction_penalty(int dir_in, int dir_out, const CostWeights& weights) {
  return weights.direction * weights.direction_table[turn_index(dir_in, dir_out)];
}

std::pair<double, PathStats> deviation_penalty(const PathStats& stats, double candidate, double w_s) {
  double penalty = 0.0;
  if (stats.count >= 2) {
    const double spread = std::sqrt(stats.m2 / stats.count) + 1.0;
    penalty = w_s * std::min(255.0, 255.0 * std::abs(candidate - stats.mean) / spread);
  }
  return {penalty, stats.with(candidate)};
}

TrainedMapping train_mapping(std::span<const std::uint8_t> samples, const TrainingOptions& options) {
  if (samples.size() < kMinTrainingSamples) {
    throw InvalidArgument("too few samples: " + std::to_string(samples.size()) + " painted pixels, need at least " +
                          std::to_string(kMinTrainingSamples));
  }
  if (options.smoothing_radius < 0) throw InvalidArgument("smoothing radius must be non-negative");
  std::array<double, 256> freq{};
  for (auto g : samples) freq[g] += 1.0;
  if (options.smoothing_radius > 0) {
    std::array<double, 256> smoothed{};
    const int r = options.smoothing_radius;
    for (int g = 0; g < 256; ++g) {
      double acc = 0.0;
      for (int k = g - r; k <= g + r; ++k) {
        if (k >= 0 && k < 256) acc += freq[k];
      }
      smoothed[g] = acc / (2 * r + 1);
    }
    freq = smoothed;
  }
  std::array<double, 256> raw{};
  double peak = 0.0;
  for (int g = 0; g < 256; ++g) {
    raw[g] = static_cast<double>(g) * g * g * freq[g] * freq[g];
    peak = std::max(peak, raw[g]);
  }
  if (peak <= 0.0) throw InvalidArgument("all painted samples have zero gradient");
  TrainedMapping m;
  for (int g = 0; g < 256; ++g) m.table[g] = static_cast<std::uint8_t>(round_half_up(255.0 * raw[g] / peak));
  return m;
}

std::vector<std::uint8_t> painted_samples(const StaticCostField& field, const Mask& painted) {
  if (painted.size() != field.size()) throw InvalidArgument("paint mask does not match image dimensions");
  std::vector<std::uint8_t> out;
  for (int y = 0; y < painted.height(); ++y)
    for (int x = 0; x < painted.width(); ++x)
      if (painted.test(x, y)) out.push_back(field.feature(x, y));
  return out;
}

void write_mapping(const TrainedMapping& mapping, std::ostream& out) {
  for (int g = 0; g < 256; ++g) out << g << ' ' << static_cast<int>(mapping.table[g]) << '\n';
}

TrainedMapping read_mapping(std::istream& in) {
  TrainedMapping m;
  for (int g = 0; g < 256; ++g) {
    int bin = -1;
    int value = -1;
    if (!(in >> bin >> value)) throw FormatError("mapping ended early", "line " + std::to_string(g + 1));
    if (bin != g) throw FormatError("expected bin " + std::to_string(g), "line " + std::to_string(g + 1));
    if (value < 0 || value > 255) throw FormatError("value outside [0,255]", "line " + std::to_string(g + 1));
    m.table[g] = static_cast<std::uint8_t>(value);
  }
  std::string extra;
  if (in >> extra) throw FormatError("unexpected data after 256 entries", "line 257");
  return m;
}

std::uint32_t step_cost(const StaticCostField& field, Pixel to, int dir, const StepContext& ctx,
                        const HeatOverlay* heat, const CostWeights& weights) {
  double cost = field.cost[to];
  if (is_diagonal(dir)) cost *= std::numbers::sqrt2;
  if (ctx.dir_in) cost += direction_penalty(*ctx.dir_in, dir, weights);
  if (ctx.stats) cost += deviation_penalty(*ctx.stats, field.feature[to], weights.deviation).first;
  if (heat) cost *= heat->factor(to);
  return static_cast<std::uint32_t>(std::clamp(round_half_up(cost), 0.0, static_cast<double>(kMaxEdgeCost)));
}

std::uint32_t edge_cost(const StaticCostField& field, Pixel from, Pixel to, const StepContext& ctx,
                        const HeatOverlay& heat, const CostWeights& weights) {
  const int dir = step_direction(from, to);
  if (dir < 0) throw InvalidArgument("edge_cost needs 8-neighbouring pixels");
  return step_cost(field, to, dir, ctx, &heat, weights);
}

Image cost_preview(const StaticCostField& field) {
  Image out(field.size());
  std::transform(field.cost.values().begin(), field.cost.values().end(), out.values().begin(),
                 [](std::uint8_t c) { return static_cast<std::uint8_t>(255 - c); });
  return out;
}

}  // namespace livewire
