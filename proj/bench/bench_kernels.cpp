// Copyright 2026 The aligndraw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "aligndraw/dataset.hpp"
#include "aligndraw/eval.hpp"
#include "aligndraw/kernels.hpp"
#include "aligndraw/model.hpp"
#include "aligndraw/rng.hpp"
#include "aligndraw/trainer.hpp"

namespace {

using namespace aligndraw;
namespace k = aligndraw::kernels;

struct GemmInputs {
  std::vector<double> a, b, c;
  explicit GemmInputs(std::size_t n) : a(n * n), b(n * n), c(n * n) {
    RngStream rng(7);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
  }
};

void BM_GemmSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  GemmInputs in(n);
  for (auto _ : state) {
    k::serial::gemm(k::Transpose::kNo, k::Transpose::kNo, n, n, n, in.a, in.b, in.c, false);
    benchmark::DoNotOptimize(in.c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

void BM_GemmParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  GemmInputs in(n);
  for (auto _ : state) {
    k::parallel::gemm(k::Transpose::kNo, k::Transpose::kNo, n, n, n, in.a, in.b, in.c, false);
    benchmark::DoNotOptimize(in.c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}

BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_GemmParallel)->Arg(64)->Arg(256)->Arg(512);

struct BatchInputs {
  ModelParams params;
  std::vector<TrainingPair> batch;
  std::vector<std::vector<Tensor>> noise;

  BatchInputs() {
    const ModelConfig cfg = ModelConfig::micro(caption_vocab().size());
    RngStream rng(3);
    params = init_params(cfg, rng, 0.1);
    RngStream pool_rng(4);
    const DigitPool pool = make_glyph_pool(5, pool_rng).resized(5);
    SplitPolicy policy;
    policy.two_digit_fraction = 0.0;
    for (int i = 0; i < 32; ++i) {
      SceneSample s = synthesize_sample(pool, rng, policy, {12, 5, 1});
      batch.push_back({s.image, s.caption.codes});
      noise.push_back(draw_noise(rng, cfg));
    }
  }
};

void BM_BatchGradient(benchmark::State& state) {
  static const BatchInputs in;
  const bool parallel = state.range(0) != 0;
  for (auto _ : state) {
    BatchResult r = batch_gradient(in.params, in.batch, in.noise, parallel);
    benchmark::DoNotOptimize(r.mean_loss);
  }
}

BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->ArgName("parallel");

void BM_Ssi(benchmark::State& state) {
  RngStream rng(5);
  Tensor a(Shape{60, 60}), b(Shape{60, 60});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(), b[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(ssi(a, b));
}

BENCHMARK(BM_Ssi);

}  // namespace

BENCHMARK_MAIN();
