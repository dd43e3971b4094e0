// Microbenchmarks for the hot paths: convolution, the full network forward
// and backward, the flow estimator and the loss.

#include <benchmark/benchmark.h>

#include <random>

#include "ofsr/dataset.hpp"
#include "ofsr/loss.hpp"
#include "ofsr/model.hpp"
#include "ofsr/runtime.hpp"

using namespace ofsr;

namespace {

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor<float> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  Tensor<float> in = random_tensor({1, c, 32, 32}, 1);
  ConvLayer<float> layer(random_tensor({c, c, k, k}, 2),
                         random_tensor({1, c, 1, 1}, 3));
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d_forward(in, layer));
  }
  state.SetItemsProcessed(state.iterations());
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * c * c * k * k * 32 * 32 * static_cast<double>(state.iterations()),
      benchmark::Counter::kIsRate, benchmark::Counter::OneK::kIs1000);
}
BENCHMARK(BM_Conv2dForward)->Args({64, 3})->Args({64, 1})->Args({32, 7});

void BM_NetworkForward(benchmark::State& state) {
  OfsrConfig config;
  ModelParams<float> params = init_params(config, 1);
  Tensor<float> flow = random_tensor({1, 2, 32, 32}, 4);
  Tensor<float> image = random_tensor({1, 3, 32, 32}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer(params, config, flow, image));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NetworkForward)->Unit(benchmark::kMillisecond);

void BM_NetworkForwardBackward(benchmark::State& state) {
  OfsrConfig config;
  ModelParams<float> params = init_params(config, 1);
  Tensor<float> flow = random_tensor({4, 2, 32, 32}, 6);
  Tensor<float> image = random_tensor({4, 3, 32, 32}, 7);
  Tensor<float> target = random_tensor({4, 2, 64, 64}, 8);
  for (auto _ : state) {
    GradTape<float> tape;
    TapeParams<float> tp = register_params(tape, params);
    GradTape<float>::Id out =
        forward(tape, tape.leaf(flow), tape.leaf(image), tp, params, config);
    tape.backward(tape.epe_loss(out, target));
    benchmark::DoNotOptimize(tape.grad(tp.weight_ids[0]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NetworkForwardBackward)->Unit(benchmark::kMillisecond);

void BM_HornSchunck(benchmark::State& state) {
  SceneConfig cfg;
  Scene scene = generate_scene(cfg, 9);
  ImageFrame f1 = bicubic_resize_image(scene.frame1, 0.5);
  ImageFrame f2 = bicubic_resize_image(scene.frame2, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(horn_schunck(f1, f2, HornSchunckConfig{}));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_HornSchunck)->Unit(benchmark::kMillisecond);

void BM_EpeLossGrad(benchmark::State& state) {
  Tensor<float> pred = random_tensor({4, 2, 64, 64}, 10);
  Tensor<float> gt = random_tensor({4, 2, 64, 64}, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(epe_loss_grad(pred, gt));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EpeLossGrad);

}  // namespace

int main(int argc, char** argv) {
  ofsr::init_runtime(argv);
  benchmark::Initialize(&argc, argv);
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
