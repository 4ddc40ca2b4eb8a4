#include <benchmark/benchmark.h>

#include "shifteq/attention.hpp"
#include "shifteq/conv.hpp"
#include "shifteq/model.hpp"
#include "shifteq/polyphase.hpp"
#include "shifteq/rng.hpp"

namespace {

using namespace shifteq;

constexpr std::size_t kC = 4;
constexpr std::size_t kS = 2;

Tensor grid_input(std::size_t n) {
  Rng r(n);
  return rng_normal(r, {kC, n, n});
}

AttentionParams params_for(std::size_t d) {
  Rng r(d + 1);
  AttentionParams p;
  p.wq = rng_normal(r, {d, d});
  p.wk = rng_normal(r, {d, d});
  p.wv = rng_normal(r, {d, d});
  return p;
}

void BM_anchor(benchmark::State& state) {
  const Tensor x = grid_input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    AnchorResult r = anchor(x, kS);
    benchmark::DoNotOptimize(r.anchored.data());
  }
}
BENCHMARK(BM_anchor)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_patch_embed_poly(benchmark::State& state) {
  const Tensor x = grid_input(static_cast<std::size_t>(state.range(0)));
  Rng r(7);
  ConvFilter f;
  f.weights = rng_normal(r, {8, kC, kS, kS});
  f.stride = kS;
  for (auto _ : state) {
    PatchEmbedResult out = patch_embed_poly(x, f, kS);
    benchmark::DoNotOptimize(out.out.data());
  }
}
BENCHMARK(BM_patch_embed_poly)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_window_attention_poly(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor x = grid_input(n);
  const AttentionParams p = params_for(kC);
  const WindowSpec win = WindowSpec::for_grid(n, n, kS);
  for (auto _ : state) {
    AttnPolyResult out = window_attention_poly(x, win, p);
    benchmark::DoNotOptimize(out.out.data());
  }
}
BENCHMARK(BM_window_attention_poly)->Arg(8)->Arg(16)->Arg(32);

void BM_gsa_poly(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor x = grid_input(n);
  const AttentionParams p = params_for(kC);
  Rng r(9);
  ConvFilter h;
  h.weights = rng_normal(r, {kC, kC, kS, kS});
  h.stride = kS;
  for (auto _ : state) {
    AttnPolyResult out = gsa_poly(x, kS, h, p);
    benchmark::DoNotOptimize(out.out.data());
  }
}
BENCHMARK(BM_gsa_poly)->Arg(8)->Arg(16)->Arg(32);

void BM_forward(benchmark::State& state) {
  const ModelSpec spec =
      default_spec(state.range(0) == 0 ? Variant::vit_poly : Variant::twins_poly);
  const ModelWeights weights = build_model(spec);
  Rng r(11);
  const Tensor x = rng_normal(r, {spec.image[0], spec.image[1], spec.image[2]});
  for (auto _ : state) {
    ForwardResult out = forward(spec, weights, x);
    benchmark::DoNotOptimize(out.logits.data());
  }
}
BENCHMARK(BM_forward)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
