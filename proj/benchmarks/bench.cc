#include <random>

#include <benchmark/benchmark.h>

#include "shlb/losses.h"
#include "shlb/model.h"
#include "shlb/occlusion.h"
#include "shlb/saliency.h"

using namespace shlb;

namespace {

template <typename Scalar>
Tensor<Scalar> noise(Shape shape, std::uint64_t seed) {
  Tensor<Scalar> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& v : t.values()) v = static_cast<Scalar>(n(rng));
  return t;
}

// desk-profile encoder
ModelSpec desk_spec() {
  ModelSpec s;
  s.conv_channels = {16, 32, 64};
  s.transformer_layers = 2;
  s.attention_heads = 4;
  return s;
}

void BM_ForwardClassifier(benchmark::State& state) {
  Model<float> model(desk_spec(), 1);
  const auto x = noise<float>({static_cast<std::size_t>(state.range(0)), 50, 6}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, Head::kClassifier));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardClassifier)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ForwardBackwardProjection(benchmark::State& state) {
  Model<float> model(desk_spec(), 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = noise<float>({n, 50, 6}, 2);
  const auto g = noise<float>({n, desk_spec().projection_out}, 3);
  for (auto _ : state) {
    model.forward(x, Head::kProjection);
    model.zero_grad();
    benchmark::DoNotOptimize(model.backward(g, {}, false));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackwardProjection)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_NtXent(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = noise<float>({n, 64}, 4), zp = noise<float>({n, 64}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(nt_xent(z, zp, 0.1));
}
BENCHMARK(BM_NtXent)->Arg(32)->Arg(256);

void BM_VicReg(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto z = noise<float>({n, 64}, 4), zp = noise<float>({n, 64}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(vicreg_total(z, zp, VicRegConfig{}));
}
BENCHMARK(BM_VicReg)->Arg(32)->Arg(256);

void BM_OccludeRandom(benchmark::State& state) {
  WindowSet w;
  w.window_length = 50;
  w.channels = 6;
  w.channel_names = {"acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"};
  w.activities = {"a"};
  w.windows.resize(1000, TimeWindow{std::vector<double>(300, 0.5)});
  std::mt19937_64 rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(occlude_random(w, 3, rng));
}
BENCHMARK(BM_OccludeRandom)->Unit(benchmark::kMillisecond);

void BM_GuidedGradCam(benchmark::State& state) {
  Model<float> model(desk_spec(), 1);
  const auto window = noise<float>({50, 6}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(guided_gradcam(model, window, 0));
}
BENCHMARK(BM_GuidedGradCam)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
