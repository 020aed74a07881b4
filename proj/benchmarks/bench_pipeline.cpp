#include <benchmark/benchmark.h>

#include "tilesense/encoding.hpp"
#include "tilesense/refdetect.hpp"
#include "tilesense/rng.hpp"
#include "tilesense/scenegen.hpp"

namespace {

using namespace tilesense;

void BM_RotatedIou(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::pair<Polygon, Polygon>> pairs;
  for (int i = 0; i < 256; ++i) {
    pairs.emplace_back(polygon_of(ShapeClass::semicircle, make_oriented_box(0, 0, 100, 50, rng.uniform(0, 360))),
                       polygon_of(ShapeClass::rectangle, make_oriented_box(rng.uniform(-40, 40), rng.uniform(-40, 40),
                                                                           100, 50, rng.uniform(0, 360))));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = pairs[i++ % pairs.size()];
    benchmark::DoNotOptimize(rotated_iou(a, b));
  }
}
BENCHMARK(BM_RotatedIou);

void BM_DecodeRotatedNms(benchmark::State& state) {
  const Catalog& catalog = default_catalog();
  const AnchorGrid grid = build_anchors(480, 480, default_anchor_levels());
  const auto tiles = scenegen::annotate(scenegen::sample_scene(3, {}), catalog);
  const PredictionTensor pred = perfect_predictions(encode(tiles, grid, catalog));
  for (auto _ : state) benchmark::DoNotOptimize(decode(pred, grid, catalog));
  state.counters["anchors"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_DecodeRotatedNms)->Unit(benchmark::kMillisecond);

void BM_Refdetect(benchmark::State& state) {
  scenegen::SceneConfig sc;
  if (state.range(0) == 0) sc.photometrics = scenegen::PhotometricRanges::none();
  std::vector<Image> images;
  for (std::uint64_t i = 0; i < 8; ++i) images.push_back(scenegen::rasterize(scenegen::sample_scene(i, sc), sc.catalog));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(detect(images[i++ % images.size()], sc.catalog));
}
BENCHMARK(BM_Refdetect)->Arg(0)->Arg(1)->ArgName("photometric")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
