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

#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace tdrn {

template <typename T>
nn::Tensor<T> to_tensor(const Image& img) {
  nn::Tensor<T> t(1, Image::kChannels, img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) t.data[i] = static_cast<T>(img.data()[i]);
  return t;
}

/// Stacks same-sized images into one (N,3,H,W) batch.
template <typename T>
nn::Tensor<T> to_batch(const std::vector<const Image*>& imgs) {
  nn::Tensor<T> t(static_cast<int>(imgs.size()), Image::kChannels, imgs.front()->height(), imgs.front()->width());
  for (std::size_t b = 0; b < imgs.size(); ++b) {
    const auto& d = imgs[b]->data();
    T* dst = t.ptr(static_cast<int>(b), 0);
    for (std::size_t i = 0; i < d.size(); ++i) dst[i] = static_cast<T>(d[i]);
  }
  return t;
}

/// Batch element `b` (first three channels) as an Image, clamped to [0,1].
template <typename T>
Image to_image(const nn::Tensor<T>& t, int b = 0) {
  Image img(t.h, t.w);
  const T* src = t.ptr(b, 0);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(src[i]);
  img.clamp01();
  return img;
}

}  // namespace tdrn
