/* Copyright 2026 The tdrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tdrn::nn {

/// Storage with a fixed SIMD alignment, so vectorised reductions sum in the
/// same order on every run.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense NCHW tensor. Scalars are 1x1x1x1; convolution weights are stored as
/// (out, in, kh, kw) in the same four slots.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  static Tensor scalar(T v) { return Tensor(1, 1, 1, 1, v); }

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t offset(int b, int ch) const { return (static_cast<std::size_t>(b) * c + ch) * plane(); }

  T* ptr(int b, int ch) { return data.data() + offset(b, ch); }
  const T* ptr(int b, int ch) const { return data.data() + offset(b, ch); }

  T& at(int b, int ch, int y, int x) { return data[offset(b, ch) + static_cast<std::size_t>(y) * w + x]; }
  T at(int b, int ch, int y, int x) const { return data[offset(b, ch) + static_cast<std::size_t>(y) * w + x]; }

  T item() const { return data.at(0); }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]";
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace tdrn::nn
