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

#include "supcon/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "supcon/kernels.hpp"

namespace supcon::ops {
namespace {

using kernels::GemmDims;
using kernels::Transpose;

template <typename T>
void require_same_size(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
Tensor<T> empty_like(const Tensor<T>& x) {
  return Tensor<T>::zeros(x.shape());
}

}  // namespace

template <std::floating_point T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto out = Tensor<T>::zeros({m, n});
  kernels::gemm<T>({m, n, k}, a.values(), b.values(), out.values(), false);
  if (tape.needs_grad({&a, &b})) {
    tape.record(out, [a, b, m, n, k](std::span<const T> g) mutable {
      if (a.requires_grad()) {
        // dA = dC * B^T
        kernels::gemm<T>({m, k, n, Transpose::no, Transpose::yes}, g, b.values(), a.grad_mut(), true);
      }
      if (b.requires_grad()) {
        // dB = A^T * dC
        kernels::gemm<T>({k, n, m, Transpose::yes, Transpose::no}, a.values(), g, b.grad_mut(), true);
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: cannot multiply " + shape_str(a.shape()) + " by transpose of " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  auto out = Tensor<T>::zeros({m, n});
  kernels::gemm<T>({m, n, k, Transpose::no, Transpose::yes}, a.values(), b.values(), out.values(),
                   false);
  if (tape.needs_grad({&a, &b})) {
    tape.record(out, [a, b, m, n, k](std::span<const T> g) mutable {
      if (a.requires_grad()) {
        // dA = dC * B
        kernels::gemm<T>({m, k, n}, g, b.values(), a.grad_mut(), true);
      }
      if (b.requires_grad()) {
        // dB = dC^T * A
        kernels::gemm<T>({n, k, m, Transpose::yes, Transpose::no}, g, a.values(), b.grad_mut(), true);
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_size(a, b, "add");
  auto out = empty_like(a);
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  if (tape.needs_grad({&a, &b})) {
    tape.record(out, [a, b](std::span<const T> g) mutable {
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dt = t->grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.size() != x.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit rows of " +
                         shape_str(x.shape()));
  }
  auto out = x.clone();
  out.set_requires_grad(false);
  const std::size_t rows = x.rows(), cols = x.cols();
  auto o = out.values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] += bv[c];
  }
  if (tape.needs_grad({&x, &bias})) {
    tape.record(out, [x, bias, rows, cols](std::span<const T> g) mutable {
      if (x.requires_grad()) {
        auto dx = x.grad_mut();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto db = bias.grad_mut();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) db[c] += g[r * cols + c];
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_size(a, b, "mul");
  auto out = empty_like(a);
  auto o = out.values();
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  if (tape.needs_grad({&a, &b})) {
    tape.record(out, [a, b](std::span<const T> g) mutable {
      if (a.requires_grad()) {
        auto da = a.grad_mut();
        auto bv = b.values();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_mut();
        auto av = a.values();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  auto out = empty_like(x);
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  if (tape.needs_grad({&x})) {
    tape.record(out, [x, factor](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T total{0};
  for (T v : x.values()) total += v;
  auto out = Tensor<T>::scalar(total);
  if (tape.needs_grad({&x})) {
    tape.record(out, [x](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      for (auto& d : dx) d += g[0];
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  return scale(tape, sum(tape, x), T{1} / static_cast<T>(x.size()));
}

template <std::floating_point T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return add_bias(tape, matmul(tape, x, weight), bias);
}

template <std::floating_point T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = static_cast<T>(0.044715);
  auto out = empty_like(x);
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const T v = xv[i];
    o[i] = T(0.5) * v * (T{1} + std::tanh(c * (v + k * v * v * v)));
  }
  if (tape.needs_grad({&x})) {
    tape.record(out, [x](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      auto xv = x.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = xv[i];
        const T t = std::tanh(c * (v + k * v * v * v));
        const T dt = c * (T{1} + T{3} * k * v * v);
        dx[i] += g[i] * (T(0.5) * (T{1} + t) + T(0.5) * v * (T{1} - t * t) * dt);
      }
    });
  }
  return out;
}

namespace {

template <typename T>
void softmax_backward(std::span<const T> y, std::span<const T> g, std::span<T> dx,
                      std::size_t outer, std::size_t n, std::size_t inner) {
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t idx = base + j * inner;
        dx[idx] += y[idx] * (g[idx] - dot);
      }
    }
  }
}

}  // namespace

template <std::floating_point T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];

  auto out = empty_like(x);
  auto y = out.values();
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      T total{0};
      for (std::size_t j = 0; j < n; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        y[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < n; ++j) y[base + j * inner] /= total;
    }
  }
  if (tape.needs_grad({&x})) {
    tape.record(out, [x, out_ref = out, outer, n, inner](std::span<const T> g) mutable {
      softmax_backward<T>(out_ref.values(), g, x.grad_mut(), outer, n, inner);
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> masked_softmax(Tape<T>& tape, const Tensor<T>& scores, std::span<const int> key_mask) {
  const std::size_t rows = scores.rows(), n = scores.cols();
  if (key_mask.size() != n) {
    throw DimensionError("masked_softmax: mask of length " + std::to_string(key_mask.size()) +
                         " for scores " + shape_str(scores.shape()));
  }
  auto out = empty_like(scores);
  auto y = out.values();
  auto xv = scores.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (key_mask[j]) mx = std::max(mx, xv[base + j]);
    }
    if (mx == -std::numeric_limits<T>::infinity()) continue;  // nothing to attend to
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      if (!key_mask[j]) continue;
      const T e = std::exp(xv[base + j] - mx);
      y[base + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < n; ++j) y[base + j] /= total;
  }
  if (tape.needs_grad({&scores})) {
    tape.record(out, [scores, out_ref = out, rows, n](std::span<const T> g) mutable {
      softmax_backward<T>(out_ref.values(), g, scores.grad_mut(), rows, n, 1);
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match last dimension of " +
                         shape_str(x.shape()));
  }
  auto out = empty_like(x);
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(rows);
  auto xv = x.values();
  auto o = out.values();
  auto gv = gain.values();
  auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu{0};
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(d);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (row[c] - mu) * is;
      xhat[r * d + c] = h;
      o[r * d + c] = gv[c] * h + bv[c];
    }
  }
  if (tape.needs_grad({&x, &gain, &bias})) {
    tape.record(out, [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                      d](std::span<const T> g) mutable {
      auto gv = gain.values();
      if (gain.requires_grad()) {
        auto dg = gain.grad_mut();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) dg[c] += g[r * d + c] * xhat[r * d + c];
        }
      }
      if (bias.requires_grad()) {
        auto db = bias.grad_mut();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < d; ++c) db[c] += g[r * d + c];
        }
      }
      if (x.requires_grad()) {
        auto dx = x.grad_mut();
        const T inv_d = T{1} / static_cast<T>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_dh{0}, mean_dh_h{0};
          for (std::size_t c = 0; c < d; ++c) {
            const T dh = g[r * d + c] * gv[c];
            mean_dh += dh;
            mean_dh_h += dh * xhat[r * d + c];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          for (std::size_t c = 0; c < d; ++c) {
            const T dh = g[r * d + c] * gv[c];
            dx[r * d + c] += inv_std[r] * (dh - mean_dh - xhat[r * d + c] * mean_dh_h);
          }
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table, std::span<const int> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  if (ids.empty()) throw DimensionError("gather_rows: empty index list");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DimensionError("gather_rows: index " + std::to_string(id) + " outside table " +
                           shape_str(table.shape()));
    }
  }
  auto out = Tensor<T>::zeros({ids.size(), d});
  auto o = out.values();
  auto tv = table.values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[r]) * d), d,
                o.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  if (tape.needs_grad({&table})) {
    std::vector<int> idx(ids.begin(), ids.end());
    tape.record(out, [table, idx = std::move(idx), d](std::span<const T> g) mutable {
      auto dt = table.grad_mut();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        T* dst = dt.data() + static_cast<std::size_t>(idx[r]) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += g[r * d + c];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> slice_columns(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t width) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (width == 0 || start + width > cols) {
    throw DimensionError("slice_columns: [" + std::to_string(start) + ", " +
                         std::to_string(start + width) + ") outside " + shape_str(x.shape()));
  }
  auto out = Tensor<T>::zeros({rows, width});
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) o[r * width + c] = xv[r * cols + start + c];
  }
  if (tape.needs_grad({&x})) {
    tape.record(out, [x, start, width, rows, cols](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) dx[r * cols + start + c] += g[r * width + c];
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> concat_columns(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_columns: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_columns: row mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.cols();
  }
  auto out = Tensor<T>::zeros({rows, total});
  auto o = out.values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) o[r * total + offset + c] = pv[r * w + c];
    }
    offset += w;
  }
  if (tape.needs_grad(parts)) {
    tape.record(out, [parts, rows, total](std::span<const T> g) mutable {
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto dp = p.grad_mut();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) dp[r * w + c] += g[r * total + offset + c];
          }
        }
        offset += w;
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> concat_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    rows += p.rows();
  }
  auto out = Tensor<T>::zeros({rows, cols});
  auto o = out.values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), o.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  if (tape.needs_grad(parts)) {
    tape.record(out, [parts](std::span<const T> g) mutable {
      std::size_t offset = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          auto dp = p.grad_mut();
          for (std::size_t i = 0; i < p.size(); ++i) dp[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> masked_mean_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const int> mask) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (mask.size() != rows) {
    throw DimensionError("masked_mean_rows: mask of length " + std::to_string(mask.size()) +
                         " for " + shape_str(x.shape()));
  }
  std::size_t count = 0;
  for (int m : mask) count += m != 0;
  if (count == 0) throw DegenerateInputError("masked_mean_rows: every position is masked");
  const T inv = T{1} / static_cast<T>(count);
  auto out = Tensor<T>::zeros({1, d});
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask[r]) continue;
    for (std::size_t c = 0; c < d; ++c) o[c] += xv[r * d + c];
  }
  for (auto& v : o) v *= inv;
  if (tape.needs_grad({&x})) {
    std::vector<int> m(mask.begin(), mask.end());
    tape.record(out, [x, m = std::move(m), rows, d, inv](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      for (std::size_t r = 0; r < rows; ++r) {
        if (!m[r]) continue;
        for (std::size_t c = 0; c < d; ++c) dx[r * d + c] += g[c] * inv;
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t rows = x.rows(), d = x.cols();
  auto out = empty_like(x);
  std::vector<T> norms(rows);
  auto xv = x.values();
  auto o = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    T sq{0};
    for (std::size_t c = 0; c < d; ++c) sq += xv[r * d + c] * xv[r * d + c];
    const T norm = std::sqrt(sq);
    if (!(norm > T{0})) {
      throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
    norms[r] = norm;
    for (std::size_t c = 0; c < d; ++c) o[r * d + c] = xv[r * d + c] / norm;
  }
  if (tape.needs_grad({&x})) {
    tape.record(out, [x, y = out, norms = std::move(norms), rows, d](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      auto yv = y.values();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot{0};
        for (std::size_t c = 0; c < d; ++c) dot += yv[r * d + c] * g[r * d + c];
        for (std::size_t c = 0; c < d; ++c) {
          dx[r * d + c] += (g[r * d + c] - yv[r * d + c] * dot) / norms[r];
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> cosine_similarity(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: sizes differ " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  auto av = a.values();
  auto bv = b.values();
  T dot{0}, na{0}, nb{0};
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    na += av[i] * av[i];
    nb += bv[i] * bv[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (!(na > T{0}) || !(nb > T{0})) {
    throw DegenerateInputError("cosine_similarity: zero-norm input");
  }
  const T sim = std::clamp(dot / (na * nb), T{-1}, T{1});
  auto out = Tensor<T>::scalar(sim);
  if (tape.needs_grad({&a, &b})) {
    tape.record(out, [a, b, na, nb, sim](std::span<const T> g) mutable {
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto da = a.grad_mut();
        for (std::size_t i = 0; i < av.size(); ++i) {
          da[i] += g[0] * (bv[i] / (na * nb) - sim * av[i] / (na * na));
        }
      }
      if (b.requires_grad()) {
        auto db = b.grad_mut();
        for (std::size_t i = 0; i < bv.size(); ++i) {
          db[i] += g[0] * (av[i] / (na * nb) - sim * bv[i] / (nb * nb));
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be below 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(rate) ? T{0} : keep_scale;
  auto out = empty_like(x);
  auto o = out.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * mask[i];
  if (tape.needs_grad({&x})) {
    tape.record(out, [x, mask = std::move(mask)](std::span<const T> g) mutable {
      auto dx = x.grad_mut();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
    });
  }
  return out;
}

template <std::floating_point T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                        std::span<const std::size_t> targets) {
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  auto zv = logits.values();
  std::vector<T> probs(logits.size());
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= classes) {
      throw DimensionError("cross_entropy: target " + std::to_string(targets[r]) + " >= " +
                           std::to_string(classes) + " classes");
    }
    const T* z = zv.data() + r * classes;
    T mx = z[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z[c]);
    T se{0};
    for (std::size_t c = 0; c < classes; ++c) {
      const T e = std::exp(z[c] - mx);
      probs[r * classes + c] = e;
      se += e;
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= se;
    total += (mx + std::log(se)) - z[targets[r]];
  }
  auto out = Tensor<T>::scalar(total / static_cast<T>(rows));
  if (tape.needs_grad({&logits})) {
    std::vector<std::size_t> tg(targets.begin(), targets.end());
    tape.record(out, [logits, probs = std::move(probs), tg = std::move(tg), rows,
                      classes](std::span<const T> g) mutable {
      auto dz = logits.grad_mut();
      const T s = g[0] / static_cast<T>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < classes; ++c) {
          const T onehot = c == tg[r] ? T{1} : T{0};
          dz[r * classes + c] += s * (probs[r * classes + c] - onehot);
        }
      }
    });
  }
  return out;
}

#define SUPCON_INSTANTIATE_OPS(T)                                                                \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> matmul_nt(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                       \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> gelu(Tape<T>&, const Tensor<T>&);                                           \
  template Tensor<T> softmax(Tape<T>&, const Tensor<T>&, std::size_t);                           \
  template Tensor<T> masked_softmax(Tape<T>&, const Tensor<T>&, std::span<const int>);           \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                T);                                                              \
  template Tensor<T> gather_rows(Tape<T>&, const Tensor<T>&, std::span<const int>);              \
  template Tensor<T> slice_columns(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);        \
  template Tensor<T> concat_columns(Tape<T>&, const std::vector<Tensor<T>>&);                    \
  template Tensor<T> concat_rows(Tape<T>&, const std::vector<Tensor<T>>&);                       \
  template Tensor<T> masked_mean_rows(Tape<T>&, const Tensor<T>&, std::span<const int>);         \
  template Tensor<T> l2_normalize_rows(Tape<T>&, const Tensor<T>&);                              \
  template Tensor<T> cosine_similarity(Tape<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, Rng&);                          \
  template Tensor<T> cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>);

SUPCON_INSTANTIATE_OPS(float)
SUPCON_INSTANTIATE_OPS(double)

#undef SUPCON_INSTANTIATE_OPS

}  // namespace supcon::ops
