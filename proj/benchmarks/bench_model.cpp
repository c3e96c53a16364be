#include <benchmark/benchmark.h>

#include <vector>

#include "themescreen/model.hpp"
#include "themescreen/rng.hpp"
#include "themescreen/tcl.hpp"

using namespace themescreen;
using numeric::Matrix;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1, 1);
  return m;
}

ThemeArray<Matrix> random_session(std::size_t tokens, std::size_t d, Rng& rng) {
  ThemeArray<Matrix> e;
  for (auto& m : e) m = random_matrix(tokens, d, rng);
  return e;
}

void BM_Correlate(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  Rng rng(1);
  const auto p = tcl::AttentionParams::init(d, tcl::Stage::kStage1, rng);
  const auto x = random_matrix(len, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tcl::correlate(x, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Correlate)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_ForwardBackward(benchmark::State& state) {
  const std::size_t d = 64;
  model::ModelConfig cfg;
  cfg.d = d;
  model::DetectionModel m(cfg, 7);
  Rng rng(2);
  const auto emb = random_session(static_cast<std::size_t>(state.range(0)), d, rng);
  const ThemeArray<double> scores{3, 6, 9, 1, 5};
  for (auto _ : state) {
    const auto tr = m.forward(emb, scores);
    benchmark::DoNotOptimize(m.backward(tr, 1));
    m.zero_grad();
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(24)->Arg(64);

// The what-if path: cached pooled stage outputs, new scores.
void BM_WhatIf(benchmark::State& state) {
  const std::size_t d = 64;
  model::ModelConfig cfg;
  cfg.d = d;
  const model::DetectionModel m(cfg, 7);
  Rng rng(3);
  const auto tr = m.forward(random_session(32, d, rng), {5, 5, 5, 5, 5});
  ThemeArray<double> scores{3, 6, 9, 1, 5};
  for (auto _ : state) {
    scores[0] = static_cast<double>(state.iterations() % 11);
    benchmark::DoNotOptimize(m.predict_from_pooled(tr.pooled, m.weights_for(scores)));
  }
}
BENCHMARK(BM_WhatIf);

}  // namespace
BENCHMARK_MAIN();
