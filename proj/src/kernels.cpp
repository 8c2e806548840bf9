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

#include "supcon/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef SUPCON_HAVE_OPENMP
#include <omp.h>
#endif

namespace supcon::kernels {
namespace {

constexpr std::size_t kParallelGemmWork = 1u << 16;
constexpr std::size_t kParallelPairRows = 64;

// One output row of C. The summation order over p is ascending for every
// element regardless of the layout branch.
template <typename T>
inline void gemm_row(const GemmDims& d, std::span<const T> a, std::span<const T> b, std::span<T> c,
                     bool accumulate, std::size_t i) {
  T* crow = c.data() + i * d.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < d.n; ++j) crow[j] = T{0};
  }
  if (d.trans_b == Transpose::no) {
    // axpy form keeps B row-contiguous
    for (std::size_t p = 0; p < d.k; ++p) {
      const T aip = d.trans_a == Transpose::no ? a[i * d.k + p] : a[p * d.m + i];
      const T* brow = b.data() + p * d.n;
      for (std::size_t j = 0; j < d.n; ++j) crow[j] += aip * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < d.n; ++j) {
      const T* bcol = b.data() + j * d.k;
      T acc = crow[j];
      if (d.trans_a == Transpose::no) {
        const T* arow = a.data() + i * d.k;
        for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * bcol[p];
      } else {
        for (std::size_t p = 0; p < d.k; ++p) acc += a[p * d.m + i] * bcol[p];
      }
      crow[j] = acc;
    }
  }
}

template <typename T>
inline double gaussian_row(std::span<const T> rows, std::size_t n, std::size_t d, double scale,
                           std::size_t i) {
  double partial = 0.0;
  const T* xi = rows.data() + i * d;
  for (std::size_t j = i + 1; j < n; ++j) {
    const T* xj = rows.data() + j * d;
    double sq = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = static_cast<double>(xi[t]) - static_cast<double>(xj[t]);
      sq += diff * diff;
    }
    partial += std::exp(-scale * sq);
  }
  return partial;
}

}  // namespace

namespace reference {

template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate) {
  for (std::size_t i = 0; i < dims.m; ++i) gemm_row(dims, a, b, c, accumulate, i);
}

template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += gaussian_row(rows, n, d, scale, i);
  return total;
}

}  // namespace reference

namespace parallel {

template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate) {
  const auto m = static_cast<std::ptrdiff_t>(dims.m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    gemm_row(dims, a, b, c, accumulate, static_cast<std::size_t>(i));
  }
}

template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale) {
  std::vector<double> partials(n, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    partials[static_cast<std::size_t>(i)] = gaussian_row(rows, n, d, scale, static_cast<std::size_t>(i));
  }
  // merge in index order so the total matches the serial reduction
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

}  // namespace parallel

template <std::floating_point T>
void gemm(const GemmDims& dims, std::span<const T> a, std::span<const T> b, std::span<T> c,
          bool accumulate) {
#ifdef SUPCON_HAVE_OPENMP
  if (dims.m > 1 && dims.m * dims.n * dims.k >= kParallelGemmWork && omp_get_max_threads() > 1) {
    parallel::gemm(dims, a, b, c, accumulate);
    return;
  }
#endif
  reference::gemm(dims, a, b, c, accumulate);
}

template <std::floating_point T>
double pairwise_gaussian_sum(std::span<const T> rows, std::size_t n, std::size_t d, double scale) {
#ifdef SUPCON_HAVE_OPENMP
  if (n >= kParallelPairRows && omp_get_max_threads() > 1) {
    return parallel::pairwise_gaussian_sum(rows, n, d, scale);
  }
#endif
  return reference::pairwise_gaussian_sum(rows, n, d, scale);
}

bool openmp_enabled() noexcept {
#ifdef SUPCON_HAVE_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#ifdef SUPCON_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define SUPCON_INSTANTIATE_KERNELS(T)                                                            \
  template void reference::gemm<T>(const GemmDims&, std::span<const T>, std::span<const T>,     \
                                   std::span<T>, bool);                                          \
  template void parallel::gemm<T>(const GemmDims&, std::span<const T>, std::span<const T>,      \
                                  std::span<T>, bool);                                           \
  template void gemm<T>(const GemmDims&, std::span<const T>, std::span<const T>, std::span<T>,  \
                        bool);                                                                   \
  template double reference::pairwise_gaussian_sum<T>(std::span<const T>, std::size_t,          \
                                                      std::size_t, double);                      \
  template double parallel::pairwise_gaussian_sum<T>(std::span<const T>, std::size_t,           \
                                                     std::size_t, double);                       \
  template double pairwise_gaussian_sum<T>(std::span<const T>, std::size_t, std::size_t, double);

SUPCON_INSTANTIATE_KERNELS(float)
SUPCON_INSTANTIATE_KERNELS(double)

#undef SUPCON_INSTANTIATE_KERNELS

}  // namespace supcon::kernels
