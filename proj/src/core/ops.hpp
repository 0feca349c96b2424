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

// Differentiable tensor ops. Every op validates shapes and throws
// ErrorCode::kInvalidArgument on mismatch.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "autograd.hpp"
#include "rng.hpp"

namespace tdrn::nn {

namespace detail {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void check_same(const char* op, const auto& a, const auto& b) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Rows ordered (ci, ky, kx); columns are output pixels. Zero padding of k/2.
template <typename T>
void im2col(const T* src, int cin, int h, int w, int k, T* col) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < cin; ++ci) {
    const T* plane = src + ci * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * hw;
        const int ox = kx - pad;
        const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
        for (int y = 0; y < h; ++y) {
          T* dst = row + static_cast<std::size_t>(y) * w;
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h || x1 <= x0) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          std::fill(dst, dst + x0, T(0));
          std::memcpy(dst + x0, plane + static_cast<std::size_t>(sy) * w + x0 + ox, sizeof(T) * (x1 - x0));
          std::fill(dst + x1, dst + w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int cin, int h, int w, int k, T* dst) {
  const int pad = k / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < cin; ++ci) {
    T* plane = dst + ci * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * hw;
        const int ox = kx - pad;
        const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* s = row + static_cast<std::size_t>(y) * w;
          T* d = plane + static_cast<std::size_t>(sy) * w + ox;
          for (int x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
}

inline int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// Separable bilinear x2 upsampling taps (half-pixel centers, edge clamped).
struct UpTap {
  int i0, i1;
  double f;
};

inline std::vector<UpTap> upsample_taps(int in, int out) {
  std::vector<UpTap> taps(out);
  for (int o = 0; o < out; ++o) {
    const double s = std::max(0.0, (o + 0.5) / 2.0 - 0.5);
    const int i0 = std::min(static_cast<int>(s), in - 1);
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace detail

/// Same-padded stride-1 convolution. weight: (cout, cin, k, k), bias: (1, cout, 1, 1).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  using Mat = detail::MatR<T>;
  const auto& X = x.value();
  const auto& W = weight.value();
  const int cout = W.n, cin = W.c, k = W.h;
  require(W.h == W.w && k % 2 == 1, "conv2d: kernel must be square and odd");
  require(X.c == cin, "conv2d: input has " + std::to_string(X.c) + " channels, weight expects " + std::to_string(cin));
  require(bias.value().size() == static_cast<std::size_t>(cout), "conv2d: bias size mismatch");
  const int h = X.h, w = X.w;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  const Eigen::Index kdim = static_cast<Eigen::Index>(cin) * k * k;

  Tensor<T> Y(X.n, cout, h, w);
  Eigen::Map<const Mat> Wm(W.data.data(), cout, kdim);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> Bv(bias.value().data.data(), cout);
  Buffer<T> col(k == 1 ? 0 : static_cast<std::size_t>(kdim * hw));
  for (int b = 0; b < X.n; ++b) {
    const T* colp = X.ptr(b, 0);
    if (k != 1) {
      detail::im2col(X.ptr(b, 0), cin, h, w, k, col.data());
      colp = col.data();
    }
    Eigen::Map<Mat> Ym(Y.ptr(b, 0), cout, hw);
    Ym.noalias() = Wm * Eigen::Map<const Mat>(colp, kdim, hw);
    Ym.colwise() += Bv;
  }

  return make_op<T>(std::move(Y), {x, weight, bias}, [cout, cin, k, h, w, hw, kdim](Node<T>& self) {
    auto& xn = *self.parents[0];
    auto& wn = *self.parents[1];
    auto& bn = *self.parents[2];
    const auto& X = xn.value;
    const auto& G = self.grad;
    Eigen::Map<const Mat> Wm(wn.value.data.data(), cout, kdim);
    Buffer<T> col(k == 1 ? 0 : static_cast<std::size_t>(kdim * hw));
    Buffer<T> dcol(xn.requires_grad && k != 1 ? static_cast<std::size_t>(kdim * hw) : 0);
    for (int b = 0; b < X.n; ++b) {
      Eigen::Map<const Mat> Gm(G.ptr(b, 0), cout, hw);
      if (bn.requires_grad) {
        T* db = bn.grad_buffer().data.data();
        for (int o = 0; o < cout; ++o) {
          const T* g = G.ptr(b, o);
          T s = 0;
          for (Eigen::Index i = 0; i < hw; ++i) s += g[i];
          db[o] += s;
        }
      }
      if (wn.requires_grad) {
        const T* colp = X.ptr(b, 0);
        if (k != 1) {
          detail::im2col(X.ptr(b, 0), cin, h, w, k, col.data());
          colp = col.data();
        }
        Eigen::Map<Mat> dW(wn.grad_buffer().data.data(), cout, kdim);
        dW.noalias() += Gm * Eigen::Map<const Mat>(colp, kdim, hw).transpose();
      }
      if (xn.requires_grad) {
        T* dx = xn.grad_buffer().ptr(b, 0);
        if (k == 1) {
          Eigen::Map<Mat>(dx, kdim, hw).noalias() += Wm.transpose() * Gm;
        } else {
          Eigen::Map<Mat>(dcol.data(), kdim, hw).noalias() = Wm.transpose() * Gm;
          detail::col2im_add(dcol.data(), cin, h, w, k, dx);
        }
      }
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same("add", a.value(), b.value());
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same("sub", a.value(), b.value());
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.value().data[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      const T sign = k == 0 ? T(1) : T(-1);
      auto& g = p->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad.data[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out = a.value();
  for (auto& v : out.data) v *= s;
  return make_op<T>(std::move(out), {a}, [s](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad.data[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& xv = self.parents[0]->value.data;
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) g[i] += self.grad.data[i];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& y = self.value.data;
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad.data[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int start, int count) {
  const auto& X = x.value();
  require(start >= 0 && count > 0 && start + count <= X.c, "slice_channels: range out of bounds");
  Tensor<T> out(X.n, count, X.h, X.w);
  const std::size_t block = static_cast<std::size_t>(count) * X.plane();
  for (int b = 0; b < X.n; ++b) std::memcpy(out.ptr(b, 0), X.ptr(b, start), sizeof(T) * block);
  return make_op<T>(std::move(out), {x}, [start, count, block](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int b = 0; b < g.n; ++b) {
      T* dst = g.ptr(b, start);
      const T* src = self.grad.ptr(b, 0);
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
    (void)count;
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  const auto& first = xs.front().value();
  int total = 0;
  for (const auto& x : xs) {
    const auto& v = x.value();
    require(v.n == first.n && v.h == first.h && v.w == first.w, "concat_channels: spatial/batch mismatch");
    total += v.c;
  }
  Tensor<T> out(first.n, total, first.h, first.w);
  std::vector<int> offsets;
  int off = 0;
  for (const auto& x : xs) {
    const auto& v = x.value();
    for (int b = 0; b < v.n; ++b) std::memcpy(out.ptr(b, off), v.ptr(b, 0), sizeof(T) * v.c * v.plane());
    offsets.push_back(off);
    off += v.c;
  }
  return make_op<T>(std::move(out), xs, [offsets](Node<T>& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      const std::size_t block = static_cast<std::size_t>(g.c) * g.plane();
      for (int b = 0; b < g.n; ++b) {
        T* dst = g.ptr(b, 0);
        const T* src = self.grad.ptr(b, offsets[k]);
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  });
}

/// 2x2 average pooling, stride 2 (odd trailing row/column dropped).
template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  const auto& X = x.value();
  require(X.h >= 2 && X.w >= 2, "avg_pool2: input smaller than 2x2");
  const int oh = X.h / 2, ow = X.w / 2;
  Tensor<T> out(X.n, X.c, oh, ow);
  for (int b = 0; b < X.n; ++b)
    for (int c = 0; c < X.c; ++c) {
      const T* s = X.ptr(b, c);
      T* d = out.ptr(b, c);
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const T* p = s + static_cast<std::size_t>(2 * y) * X.w + 2 * xx;
          d[static_cast<std::size_t>(y) * ow + xx] = T(0.25) * (p[0] + p[1] + p[X.w] + p[X.w + 1]);
        }
    }
  return make_op<T>(std::move(out), {x}, [oh, ow](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int b = 0; b < g.n; ++b)
      for (int c = 0; c < g.c; ++c) {
        T* d = g.ptr(b, c);
        const T* s = self.grad.ptr(b, c);
        for (int y = 0; y < oh; ++y)
          for (int xx = 0; xx < ow; ++xx) {
            const T v = T(0.25) * s[static_cast<std::size_t>(y) * ow + xx];
            T* p = d + static_cast<std::size_t>(2 * y) * g.w + 2 * xx;
            p[0] += v;
            p[1] += v;
            p[g.w] += v;
            p[g.w + 1] += v;
          }
      }
  });
}

/// Bilinear x2 upsampling with half-pixel centers.
template <typename T>
Var<T> upsample2(const Var<T>& x) {
  const auto& X = x.value();
  const int oh = X.h * 2, ow = X.w * 2;
  auto ty = detail::upsample_taps(X.h, oh);
  auto tx = detail::upsample_taps(X.w, ow);
  Tensor<T> out(X.n, X.c, oh, ow);
  for (int b = 0; b < X.n; ++b)
    for (int c = 0; c < X.c; ++c) {
      const T* s = X.ptr(b, c);
      T* d = out.ptr(b, c);
      for (int y = 0; y < oh; ++y) {
        const T fy = static_cast<T>(ty[y].f);
        const T* r0 = s + static_cast<std::size_t>(ty[y].i0) * X.w;
        const T* r1 = s + static_cast<std::size_t>(ty[y].i1) * X.w;
        for (int xx = 0; xx < ow; ++xx) {
          const T fx = static_cast<T>(tx[xx].f);
          const T top = (T(1) - fx) * r0[tx[xx].i0] + fx * r0[tx[xx].i1];
          const T bot = (T(1) - fx) * r1[tx[xx].i0] + fx * r1[tx[xx].i1];
          d[static_cast<std::size_t>(y) * ow + xx] = (T(1) - fy) * top + fy * bot;
        }
      }
    }
  return make_op<T>(std::move(out), {x}, [ty = std::move(ty), tx = std::move(tx), oh, ow](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int b = 0; b < g.n; ++b)
      for (int c = 0; c < g.c; ++c) {
        T* d = g.ptr(b, c);
        const T* s = self.grad.ptr(b, c);
        for (int y = 0; y < oh; ++y) {
          const T fy = static_cast<T>(ty[y].f);
          T* r0 = d + static_cast<std::size_t>(ty[y].i0) * g.w;
          T* r1 = d + static_cast<std::size_t>(ty[y].i1) * g.w;
          for (int xx = 0; xx < ow; ++xx) {
            const T v = s[static_cast<std::size_t>(y) * ow + xx];
            const T fx = static_cast<T>(tx[xx].f);
            r0[tx[xx].i0] += (T(1) - fy) * (T(1) - fx) * v;
            r0[tx[xx].i1] += (T(1) - fy) * fx * v;
            r1[tx[xx].i0] += fy * (T(1) - fx) * v;
            r1[tx[xx].i1] += fy * fx * v;
          }
        }
      }
  });
}

/// Inverted dropout: zero with probability p, survivors scaled by 1/(1-p).
/// p == 0 returns the input unchanged (no mask is drawn).
template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout rate must be in [0, 1)");
  if (p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.value().size());
  for (auto& m : mask) m = rng.uniform() < p ? T(0) : keep_scale;
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask[i];
  return make_op<T>(std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += mask[i] * self.grad.data[i];
  });
}

/// Same 3x3 stencil applied to every channel (cross-correlation), reflect-101 border.
template <typename T>
Var<T> stencil3x3(const Var<T>& x, const std::array<double, 9>& kernel) {
  const auto& X = x.value();
  require(X.h >= 3 && X.w >= 3, "stencil: image must be at least 3x3, got " + X.shape_str());
  std::array<T, 9> k;
  for (int i = 0; i < 9; ++i) k[i] = static_cast<T>(kernel[i]);
  const int h = X.h, w = X.w;
  Tensor<T> out(X.n, X.c, h, w);
  for (int b = 0; b < X.n; ++b)
    for (int c = 0; c < X.c; ++c) {
      const T* s = X.ptr(b, c);
      T* d = out.ptr(b, c);
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          T acc = T(0);
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const T kv = k[(dy + 1) * 3 + dx + 1];
              if (kv == T(0)) continue;
              acc += kv * s[static_cast<std::size_t>(detail::reflect101(y + dy, h)) * w + detail::reflect101(xx + dx, w)];
            }
          d[static_cast<std::size_t>(y) * w + xx] = acc;
        }
    }
  return make_op<T>(std::move(out), {x}, [k, h, w](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (int b = 0; b < g.n; ++b)
      for (int c = 0; c < g.c; ++c) {
        T* d = g.ptr(b, c);
        const T* s = self.grad.ptr(b, c);
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx) {
            const T v = s[static_cast<std::size_t>(y) * w + xx];
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const T kv = k[(dy + 1) * 3 + dx + 1];
                if (kv == T(0)) continue;
                d[static_cast<std::size_t>(detail::reflect101(y + dy, h)) * w + detail::reflect101(xx + dx, w)] += kv * v;
              }
          }
      }
  });
}

/// mean(|a - b|) over every element.
template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  detail::check_same("l1_mean", a.value(), b.value());
  const auto& A = a.value().data;
  const auto& B = b.value().data;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) acc += std::abs(static_cast<double>(A[i]) - static_cast<double>(B[i]));
  const double n = static_cast<double>(A.size());
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(acc / n)), {a, b}, [n](Node<T>& self) {
    const T g = static_cast<T>(self.grad.data[0] / n);
    const auto& A = self.parents[0]->value.data;
    const auto& B = self.parents[1]->value.data;
    for (std::size_t k = 0; k < 2; ++k) {
      if (!self.parents[k]->requires_grad) continue;
      auto& d = self.parents[k]->grad_buffer().data;
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < d.size(); ++i) {
        const T diff = A[i] - B[i];
        if (diff > T(0)) d[i] += sign * g;
        else if (diff < T(0)) d[i] -= sign * g;
      }
    }
  });
}

/// mean((a - b)^2) over every element.
template <typename T>
Var<T> mse_mean(const Var<T>& a, const Var<T>& b) {
  detail::check_same("mse_mean", a.value(), b.value());
  const auto& A = a.value().data;
  const auto& B = b.value().data;
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = static_cast<double>(A[i]) - static_cast<double>(B[i]);
    acc += d * d;
  }
  const double n = static_cast<double>(A.size());
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(acc / n)), {a, b}, [n](Node<T>& self) {
    const T g = static_cast<T>(2.0 * self.grad.data[0] / n);
    const auto& A = self.parents[0]->value.data;
    const auto& B = self.parents[1]->value.data;
    for (std::size_t k = 0; k < 2; ++k) {
      if (!self.parents[k]->requires_grad) continue;
      auto& d = self.parents[k]->grad_buffer().data;
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += sign * g * (A[i] - B[i]);
    }
  });
}

/// Confidence-weighted gradient error with log barrier, averaged over batch and pixels:
///   (1 / (N*H*W)) * sum_{n,p,q} [ C * sum_ch |g_hat - g_ref| - lambda_c * log(clamp(C, eps, 1-eps)) ]
/// conf: (N,1,H,W); g_hat, g_ref: (N,C,H,W).
template <typename T>
Var<T> confidence_weighted_l1(const Var<T>& conf, const Var<T>& g_hat, const Var<T>& g_ref, double lambda_c,
                              double eps) {
  detail::check_same("confidence_weighted_l1", g_hat.value(), g_ref.value());
  const auto& C = conf.value();
  const auto& G = g_hat.value();
  require(C.c == 1 && C.n == G.n && C.h == G.h && C.w == G.w,
          "confidence map must be (N,1,H,W) matching " + G.shape_str() + ", got " + C.shape_str());
  const std::size_t hw = G.plane();
  const double norm = static_cast<double>(G.n) * static_cast<double>(hw);
  double acc = 0.0;
  for (int b = 0; b < G.n; ++b) {
    const T* c = C.ptr(b, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      double e = 0.0;
      for (int ch = 0; ch < G.c; ++ch)
        e += std::abs(static_cast<double>(G.ptr(b, ch)[p]) - static_cast<double>(g_ref.value().ptr(b, ch)[p]));
      const double cv = static_cast<double>(c[p]);
      acc += cv * e - lambda_c * std::log(std::clamp(cv, eps, 1.0 - eps));
    }
  }
  return make_op<T>(Tensor<T>::scalar(static_cast<T>(acc / norm)), {conf, g_hat, g_ref},
                    [hw, norm, lambda_c, eps](Node<T>& self) {
                      const double up = static_cast<double>(self.grad.data[0]) / norm;
                      auto& cn = *self.parents[0];
                      auto& hn = *self.parents[1];
                      auto& rn = *self.parents[2];
                      const auto& G = hn.value;
                      const auto& R = rn.value;
                      for (int b = 0; b < G.n; ++b) {
                        const T* c = cn.value.ptr(b, 0);
                        for (std::size_t p = 0; p < hw; ++p) {
                          const double cv = static_cast<double>(c[p]);
                          if (cn.requires_grad) {
                            double e = 0.0;
                            for (int ch = 0; ch < G.c; ++ch)
                              e += std::abs(static_cast<double>(G.ptr(b, ch)[p]) - static_cast<double>(R.ptr(b, ch)[p]));
                            const double dlog = (cv > eps && cv < 1.0 - eps) ? lambda_c / cv : 0.0;
                            cn.grad_buffer().ptr(b, 0)[p] += static_cast<T>(up * (e - dlog));
                          }
                          for (int ch = 0; ch < G.c; ++ch) {
                            const double diff = static_cast<double>(G.ptr(b, ch)[p]) - static_cast<double>(R.ptr(b, ch)[p]);
                            const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                            if (hn.requires_grad) hn.grad_buffer().ptr(b, ch)[p] += static_cast<T>(up * cv * s);
                            if (rn.requires_grad) rn.grad_buffer().ptr(b, ch)[p] -= static_cast<T>(up * cv * s);
                          }
                        }
                      }
                    });
}

}  // namespace tdrn::nn
