#include <benchmark/benchmark.h>

#include <vector>

#include "densepoint/decoder.hpp"
#include "densepoint/layers.hpp"
#include "densepoint/losses.hpp"
#include "densepoint/metrics.hpp"
#include "densepoint/micronet.hpp"
#include "densepoint/rng.hpp"
#include "densepoint/supervision.hpp"
#include "densepoint/synthcrowd.hpp"

using namespace densepoint;

namespace {

FeatureMap random_map(Rng& rng, FeatureShape s) {
  FeatureMap m(s);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

DenseGrid random_grid(Rng& rng, std::size_t h, std::size_t w) {
  DenseGrid g(h, w, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(0.0, 1.0);
  return g;
}

ImageRecord scene(int size, int count) {
  SceneConfig cfg;
  cfg.image_size = size;
  cfg.count_min = count;
  cfg.count_max = count;
  Rng rng(7);
  return generate_scene(cfg, rng);
}

}  // namespace

static void BM_ConvForward(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const LayerSpec l = LayerSpec::conv(16, 16, 3, 1, 1);
  Rng rng(1);
  const FeatureMap in = random_map(rng, {16, n, n});
  std::vector<double> p(l.parameter_count());
  for (double& v : p) v = rng.uniform(-0.1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(layer_forward(l, p, in));
}
BENCHMARK(BM_ConvForward)->Arg(32)->Arg(64);

static void BM_ConvBackward(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const LayerSpec l = LayerSpec::conv(16, 16, 3, 1, 1);
  Rng rng(2);
  const FeatureMap in = random_map(rng, {16, n, n});
  std::vector<double> p(l.parameter_count());
  for (double& v : p) v = rng.uniform(-0.1, 0.1);
  const FeatureMap out = layer_forward(l, p, in);
  const FeatureMap g = random_map(rng, out.shape);
  std::vector<double> gp(p.size(), 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(layer_backward(l, p, in, out, g, gp));
}
BENCHMARK(BM_ConvBackward)->Arg(32)->Arg(64);

static void BM_MicroNetForward(benchmark::State& state) {
  Rng rng(3);
  const MicroNet net = MicroNet::initialized(default_micronet_spec(), rng);
  const DenseGrid img = random_grid(rng, 128, 128);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(img));
}
BENCHMARK(BM_MicroNetForward);

static void BM_TotalLoss(benchmark::State& state) {
  const ImageRecord r = scene(128, 12);
  const SupervisionConfig sup;
  const LossConfig cfg;
  const DenseGrid gh = make_heatmap(r, sup);
  const DenseGrid gd = make_density(r, sup);
  Rng rng(4);
  const DenseGrid ph = random_grid(rng, 128, 128);
  const DenseGrid pd = random_grid(rng, 64, 64);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_total_loss(ph, gh, pd, gd, cfg));
}
BENCHMARK(BM_TotalLoss);

static void BM_LocalPeaks(benchmark::State& state) {
  Rng rng(5);
  const DenseGrid g = random_grid(rng, 128, 128);
  for (auto _ : state) benchmark::DoNotOptimize(local_peaks(g));
}
BENCHMARK(BM_LocalPeaks);

static void BM_MatchPoints(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const ImageRecord r = scene(256, n);
  Rng rng(6);
  std::vector<Detection> preds;
  for (const auto& p : r.points) {
    preds.push_back({static_cast<int>(p.x) + static_cast<int>(rng.uniform_int(-2, 2)),
                     static_cast<int>(p.y) + static_cast<int>(rng.uniform_int(-2, 2)), 0.9});
  }
  for (auto _ : state) benchmark::DoNotOptimize(match_points(preds, r.points, MatchMode::large));
}
BENCHMARK(BM_MatchPoints)->Arg(10)->Arg(60);

static void BM_MakeDensity(benchmark::State& state) {
  const ImageRecord r = scene(128, static_cast<int>(state.range(0)));
  const SupervisionConfig sup;
  for (auto _ : state) benchmark::DoNotOptimize(make_density(r, sup));
}
BENCHMARK(BM_MakeDensity)->Arg(5)->Arg(15);
BENCHMARK_MAIN();
