// Copyright 2026 The supcon Authors.
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


// Reference (serial) kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "supcon/kernels.hpp"
#include "supcon/rng.hpp"

namespace {

using supcon::kernels::GemmDims;
using supcon::kernels::Transpose;

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  supcon::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const GemmDims dims{n, n, n, Transpose::no, Transpose::yes};
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      supcon::kernels::parallel::gemm<float>(dims, a, b, c, false);
    } else {
      supcon::kernels::reference::gemm<float>(dims, a, b, c, false);
    }
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_pairwise_gaussian_sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 64;
  const auto rows = random_values(n * d, 3);
  for (auto _ : state) {
    double s = 0.0;
    if constexpr (Parallel) {
      s = supcon::kernels::parallel::pairwise_gaussian_sum<float>(rows, n, d, 2.0);
    } else {
      s = supcon::kernels::reference::pairwise_gaussian_sum<float>(rows, n, d, 2.0);
    }
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * (n - 1) / 2));
}

}  // namespace

BENCHMARK(BM_gemm<false>)->Name("gemm/reference")->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_gemm<true>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_pairwise_gaussian_sum<false>)->Name("pairwise_gaussian_sum/reference")->Range(128, 2048)->UseRealTime();
BENCHMARK(BM_pairwise_gaussian_sum<true>)->Name("pairwise_gaussian_sum/parallel")->Range(128, 2048)->UseRealTime();

BENCHMARK_MAIN();
