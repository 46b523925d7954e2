#include <benchmark/benchmark.h>

#include "tdet/conv.hpp"
#include "tdet/deform_conv.hpp"
#include "tdet/detect.hpp"
#include "tdet/nms.hpp"
#include "tdet/rng.hpp"
#include "tdet/toy.hpp"
#include "tdet/train.hpp"
#include "tdet/turbulence.hpp"

using namespace tdet;

namespace {

Tensor random_tensor(Shape4 shape, std::uint64_t seed, float scale = 1.0f) {
  Rng rng(seed);
  Tensor t(shape);
  for (float& v : t.data()) v = scale * static_cast<float>(rng.uniform(-1, 1));
  return t;
}

ConvWeights random_weights(int out, int in, std::uint64_t seed) {
  ConvWeights w(out, in, 3, 3);
  w.weight = random_tensor(w.weight.shape(), seed, 0.1f);
  return w;
}

model::ModelConfig variant(int v) {
  model::ModelConfig c;
  c.fpn = v >= 1;
  c.deformable = v == 2;
  return c;
}

const char* variant_name(int v) { return v == 0 ? "plain" : v == 1 ? "fpn" : "fpn+dc"; }

// Arg: spatial side; 32 channels in and out.
void BM_Conv2d(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 32, side, side}, 1);
  const ConvWeights w = random_weights(32, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, {1, 1}));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Conv2d)->Arg(16)->Arg(32)->Arg(64);

void BM_DeformableConv2d(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 32, side, side}, 1);
  const ConvWeights w = random_weights(32, 32, 2);
  const Tensor off = random_tensor({1, 18, side, side}, 3, 2.0f);
  for (auto _ : state) benchmark::DoNotOptimize(deformable_conv2d(x, off, w, {1, 1}));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_DeformableConv2d)->Arg(16)->Arg(32)->Arg(64);

void BM_DeformableConv2dBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor x = random_tensor({1, 32, side, side}, 1);
  const ConvWeights w = random_weights(32, 32, 2);
  const Tensor off = random_tensor({1, 18, side, side}, 3, 2.0f);
  const Tensor up = random_tensor({1, 32, side, side}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(deformable_conv2d_backward(x, off, w, {1, 1}, up));
}
BENCHMARK(BM_DeformableConv2dBackward)->Arg(16)->Arg(32);

void BM_Nms(benchmark::State& state) {
  Rng rng(5);
  std::vector<Detection> dets;
  for (int i = 0; i < state.range(0); ++i) {
    const auto x = static_cast<float>(rng.uniform(0, 48)), y = static_cast<float>(rng.uniform(0, 48));
    dets.push_back({{x, y, x + 16, y + 16}, static_cast<int>(rng.below(3)),
                    static_cast<float>(rng.uniform())});
  }
  for (auto _ : state) benchmark::DoNotOptimize(nms(dets, 0.5f));
}
BENCHMARK(BM_Nms)->Arg(300)->Arg(3000);

void BM_Degrade(benchmark::State& state) {
  const DatasetImage toy = toy::render_toy_image(1, 64, "x.ppm");
  turbulence::DegradeConfig c;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    c.seed = seed++;
    benchmark::DoNotOptimize(turbulence::degrade(toy.image, toy.boxes, c));
  }
}
BENCHMARK(BM_Degrade);

// Arg: 0 plain, 1 fpn, 2 fpn+dc.
void BM_TrainStep(benchmark::State& state) {
  const int v = static_cast<int>(state.range(0));
  state.SetLabel(variant_name(v));
  model::Detector detector(variant(v), 1);
  const DatasetImage toy = toy::render_toy_image(2, 64, "x.ppm");
  const TrainExample ex = make_example(toy.image, toy.boxes);
  Rng sampler(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        compute_gradients(detector, ex, TrainConfig{}, loss::LossConfig{}, sampler));
  }
}
BENCHMARK(BM_TrainStep)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_DetectImage(benchmark::State& state) {
  const int v = static_cast<int>(state.range(0));
  state.SetLabel(variant_name(v));
  const model::Detector detector(variant(v), 1);
  const DatasetImage toy = toy::render_toy_image(4, 64, "x.ppm");
  for (auto _ : state) benchmark::DoNotOptimize(detect_image(detector, toy.image, DetectConfig{}));
}
BENCHMARK(BM_DetectImage)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
