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

#pragma once

#include <concepts>
#include <cstddef>
#include <span>

// Dense inner loops. Every kernel has a serial reference implementation and an
// OpenMP implementation that partitions only independent outputs across
// threads; each output is reduced in the same fixed order in both, so the two
// are bitwise identical. The reference versions exist for testing and for the
// benchmark comparison.
namespace supcon::kernels {

enum class Transpose : bool { no = false, yes = true };

// C[m x n] (+)= op(A)[m x k] * op(B)[k x n]. A is stored [m x k] (or [k x m]
// when transposed) and B is stored [k x n] (or [n x k] when transposed).
struct GemmDims {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  Transpose trans_a = Transpose::no;
  Transpose trans_b = Transpose::no;
};

namespace reference {

template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate);

// Sum over unordered pairs i < j of exp(-scale * ||x_i - x_j||^2), in double.
template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale);

}  // namespace reference

namespace parallel {

template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate);

template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale);

}  // namespace parallel

// Dispatches to the parallel kernel when it is compiled in and the problem is
// large enough to amortize the thread team; results do not depend on the path.
template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate);

template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale);

bool openmp_enabled() noexcept;
int max_threads() noexcept;

}  // namespace supcon::kernels
