#include <benchmark/benchmark.h>

#include "livewire/cost_model.hpp"
#include "livewire/engine.hpp"
#include "livewire/livewire3d.hpp"
#include "livewire/mesh.hpp"
#include "livewire/metrics.hpp"

using namespace livewire;

namespace {

Phantom square_phantom(int side, int depth = 1) {
  PhantomSpec s;
  s.width = s.height = side;
  s.depth = depth;
  s.center = {side / 2.0, side / 2.0};
  s.radius = side * 0.3;
  s.noise_sigma = 4;
  return Phantom(s);
}

void BM_StaticCost(benchmark::State& state) {
  const Phantom ph = square_phantom(static_cast<int>(state.range(0)));
  const Image img = ph.volume().slice(0);
  for (auto _ : state) benchmark::DoNotOptimize(static_cost(img, CostWeights{}));
  state.SetItemsProcessed(state.iterations() * img.size().area());
}
BENCHMARK(BM_StaticCost)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_PathTree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Phantom ph = square_phantom(n);
  const auto field = static_cost(ph.volume().slice(0), CostWeights{});
  for (auto _ : state) benchmark::DoNotOptimize(compute_path_tree(field, CostWeights{}, {n / 5, n / 2}));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_PathTree)->Arg(128)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const Phantom ph = square_phantom(256);
  const auto field = static_cost(ph.volume().slice(0), CostWeights{});
  const auto tree = compute_path_tree(field, CostWeights{}, {50, 128});
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(tree, {206, 128}));
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMicrosecond);

void BM_ChamferDT(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mask m(n, n);
  for (int i = 0; i < n; ++i) m.set(i, (i * 7) % n);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_dt(m));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ChamferDT)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_SegmentVolume(benchmark::State& state) {
  PhantomSpec s;
  s.noise_sigma = 4;
  const Phantom ph(s);
  const auto seg = analytic_segment(ph, perpendicular_cuts(ph), 0, 7);
  SegmentationOptions opt;
  opt.restrict_to_strip = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(segment_volume(ph.volume(), {seg}, opt));
}
BENCHMARK(BM_SegmentVolume)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_MeshReconstruct(benchmark::State& state) {
  const Phantom ph(PhantomSpec{});
  ContourSet cs;
  cs.segments = {{0, 7}};
  for (int k = 0; k < 8; ++k) cs.slices.push_back({k, ph.ground_truth_pixels(k)});
  const int samples = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(cs, {samples, {}}));
}
BENCHMARK(BM_MeshReconstruct)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
