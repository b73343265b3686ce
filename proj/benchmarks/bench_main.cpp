#include <benchmark/benchmark.h>

#include "autocl/augment.hpp"
#include "autocl/contrast.hpp"
#include "autocl/controller.hpp"
#include "autocl/encoder.hpp"
#include "autocl/search.hpp"
#include "autocl/synth.hpp"

using namespace autocl;

namespace {

Tensor noise(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Tensor x(std::move(shape));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = n(rng);
  return x;
}

EncoderConfig bench_encoder(std::size_t hidden) {
  EncoderConfig c;
  c.depth = 4;
  c.hidden = hidden;
  c.out_dim = 2 * hidden;
  return c;
}

void BM_EncoderForward(benchmark::State& state) {
  const EncoderConfig cfg = bench_encoder(static_cast<std::size_t>(state.range(1)));
  const EncoderParams params = init_encoder(cfg, 1);
  const Tensor x = noise({16, static_cast<std::size_t>(state.range(0)), 1}, 2);
  for (auto _ : state) {
    Tape tape;
    Var h = encode(cfg, bind_encoder(tape, params, false), tape.constant(x));
    benchmark::DoNotOptimize(h.value().ptr());
  }
}
BENCHMARK(BM_EncoderForward)->Args({128, 16})->Args({512, 16})->Args({128, 64});

void BM_EncoderForwardBackward(benchmark::State& state) {
  const EncoderConfig cfg = bench_encoder(static_cast<std::size_t>(state.range(1)));
  const EncoderParams params = init_encoder(cfg, 1);
  const Tensor x = noise({16, static_cast<std::size_t>(state.range(0)), 1}, 2);
  for (auto _ : state) {
    Tape tape;
    Var h = encode(cfg, bind_encoder(tape, params, true), tape.constant(x));
    const Gradients g = tape.backward(sum(mul(h, h)));
    benchmark::DoNotOptimize(&g);
  }
}
BENCHMARK(BM_EncoderForwardBackward)->Args({128, 16})->Args({512, 16});

void BM_StrategyLoss(benchmark::State& state) {
  const Tensor a = noise({16, static_cast<std::size_t>(state.range(0)), 32}, 3);
  const Tensor b = noise({16, static_cast<std::size_t>(state.range(0)), 32}, 4);
  Strategy s = ggs_preset();
  s.temporal = state.range(1) != 0;
  for (auto _ : state) {
    Tape tape;
    Var loss = strategy_loss(tape.leaf(a, true), tape.leaf(b, true), s);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_StrategyLoss)->Args({128, 0})->Args({128, 1});

void BM_ViewPair(benchmark::State& state) {
  const Tensor x = noise({16, 128, 3}, 5);
  Rng rng(6);
  Strategy s = ggs_preset();
  s.freq_mask_p = 0.3;
  s.jitter_p = 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(make_view_pair(x, s, rng));
}
BENCHMARK(BM_ViewPair);

void BM_ControllerStep(benchmark::State& state) {
  ControllerParams params = init_controller(static_cast<std::size_t>(state.range(0)), 7);
  Rng rng(8);
  for (auto _ : state) {
    const ControllerSample sample = sample_strategy(params, rng);
    reinforce_update(params, sample, 0.1, 1e-4);
  }
}
BENCHMARK(BM_ControllerStep)->Arg(64)->Arg(320);

void BM_ProbeStep(benchmark::State& state) {
  const TaskData data = search_data(synth_classification(30, 128, 3, 0.5, 9));
  SearchConfig cfg = default_search_config(TaskKind::classification);
  cfg.encoder.depth = 2;
  cfg.encoder.hidden = 8;
  cfg.encoder.out_dim = 16;
  TaskEnvironment env(data, cfg);
  const EncoderParams enc = init_encoder(cfg.encoder, 10);
  Rng rng(11);
  for (auto _ : state) benchmark::DoNotOptimize(env.probe(&enc, ggs_preset(), rng));
}
BENCHMARK(BM_ProbeStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
