#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>

#include "livewire/grid.hpp"
#include "livewire/image_ops.hpp"

namespace livewire {

/// Turn penalties for 0, 45, 90, 135 and 180 degree turns.
using DirectionTable = std::array<double, 5>;
inline constexpr DirectionTable kDefaultDirectionTable = {0.0, 8.0, 24.0, 64.0, 128.0};

struct CostWeights {
  double gradient = 0.5;   // w_G
  double laplacian = 0.5;  // w_L
  double direction = 0.0;  // w_D
  double deviation = 0.0;  // w_S
  DirectionTable direction_table = kDefaultDirectionTable;

  bool anisotropic() const { return direction > 0.0 || deviation > 0.0; }
  void validate() const;
};

/// 256-entry map from gradient-feature bin to preference in [0,255]; 255 is the
/// most favoured bin.
struct TrainedMapping {
  std::array<std::uint8_t, 256> table{};

  friend bool operator==(const TrainedMapping&, const TrainedMapping&) = default;
};

/// Per-pixel base cost plus the gradient-feature bin used by training and the
/// deviation statistics.
struct StaticCostField {
  Grid<std::uint8_t> cost;
  Grid<std::uint8_t> feature;

  GridSize size() const { return cost.size(); }
};

/// Running statistics of gradient-feature values along a path.
struct PathStats {
  int count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  double variance() const { return count > 0 ? m2 / count : 0.0; }
  PathStats with(double value) const;
};

/// Multiplicative inflation of the current wire's pixels.
struct HeatOverlay {
  int level = 0;
  Mask heated;

  double factor(Pixel p) const {
    return level > 0 && heated.contains(p) && heated.test(p) ? 1.0 + 0.25 * level : 1.0;
  }
  void reset() {
    level = 0;
    heated = Mask();
  }
};

/// 255 * (1 - grad / grad_max), rounded half-up; 255 when grad_max is 0.
int gradient_feature(double grad, double grad_max);

/// 1 on a Laplacian zero-crossing, 255 elsewhere.
inline int laplacian_feature(bool is_crossing) { return is_crossing ? 1 : 255; }

/// Gradient magnitude scaled to a bin in [0,255].
int gradient_bin(double grad, double grad_max);

StaticCostField static_cost(const Image& img, const CostWeights& weights, const TrainedMapping* mapping = nullptr);

/// Index 0..4 of the turn between two compass directions.
int turn_index(int dir_in, int dir_out);
double direction_penalty(int dir_in, int dir_out, const CostWeights& weights);
inline double direction_penalty(int dir_in, int dir_out, double w_d) {
  return w_d * kDefaultDirectionTable[turn_index(dir_in, dir_out)];
}

/// Penalty for `candidate` given the path so far, and the stats including it.
std::pair<double, PathStats> deviation_penalty(const PathStats& stats, double candidate, double w_s);

struct TrainingOptions {
  /// Half-width of the box blur applied to the sample histogram; 0 disables it.
  int smoothing_radius = 0;
};

inline constexpr std::size_t kMinTrainingSamples = 16;

/// Preference table proportional to bin^3 * frequency^2, scaled so the maximum is 255.
TrainedMapping train_mapping(std::span<const std::uint8_t> samples, const TrainingOptions& options = {});

/// Feature bins of the pixels selected by `painted`.
std::vector<std::uint8_t> painted_samples(const StaticCostField& field, const Mask& painted);

void write_mapping(const TrainedMapping& mapping, std::ostream& out);
TrainedMapping read_mapping(std::istream& in);

/// Optional per-step context for anisotropic features.
struct StepContext {
  std::optional<int> dir_in;
  const PathStats* stats = nullptr;
};

inline constexpr std::uint32_t kMaxEdgeCost = 65535;

/// Integer weight of the step into `to` along compass direction `dir`; `heat` may be null.
std::uint32_t step_cost(const StaticCostField& field, Pixel to, int dir, const StepContext& ctx,
                        const HeatOverlay* heat, const CostWeights& weights);

/// Integer weight of the step from -> to.
std::uint32_t edge_cost(const StaticCostField& field, Pixel from, Pixel to, const StepContext& ctx,
                        const HeatOverlay& heat, const CostWeights& weights);

/// Grayscale rendering of a cost field: bright = cheap.
Image cost_preview(const StaticCostField& field);

}  // namespace livewire
