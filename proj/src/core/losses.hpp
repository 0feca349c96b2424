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

// Restoration losses: L1, perceptual, and the confidence-guided gradient loss
// over horizontal, vertical and Laplacian image gradients.
//
//   L_g     = sum_{i in h,v,s} mean_{n,p,q} [ C_i * |grad_i Ihat - grad_i I|_1 - lambda_c * log C_i ]
//   L_final = L_1 + lambda_g * L_g + lambda_p * L_p
//
// with |.|_1 summed over colour channels and C_i = CB_i(concat(grad_i I, grad_i Ihat)).

#include <array>
#include <filesystem>
#include <string>

#include "arch.hpp"
#include "checkpoint.hpp"

namespace tdrn::losses {

using nn::Var;

struct LossWeights {
  double lambda_c = 0.01;
  double lambda_g = 0.25;
  double lambda_p = 0.1;

  void validate() const {
    require(lambda_c >= 0 && lambda_g >= 0 && lambda_p >= 0, "loss weights must be nonnegative");
  }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Clamp applied to confidences inside the log.
inline constexpr double kConfidenceEps = 1e-6;

enum class GradientKind { kHorizontal = 0, kVertical = 1, kLaplacian = 2 };
inline constexpr std::array<GradientKind, 3> kGradientKinds = {GradientKind::kHorizontal, GradientKind::kVertical,
                                                               GradientKind::kLaplacian};

constexpr std::array<double, 9> stencil(GradientKind kind) {
  switch (kind) {
    case GradientKind::kHorizontal: return {0, 0, 0, -0.5, 0, 0.5, 0, 0, 0};
    case GradientKind::kVertical: return {0, -0.5, 0, 0, 0, 0, 0, 0.5, 0};
    case GradientKind::kLaplacian: return {0, 1, 0, 1, -4, 1, 0, 1, 0};
  }
  return {};
}

template <typename T>
Var<T> image_gradient(const Var<T>& img, GradientKind kind) {
  return nn::stencil3x3(img, stencil(kind));
}
template <typename T>
Var<T> grad_h(const Var<T>& img) { return image_gradient(img, GradientKind::kHorizontal); }
template <typename T>
Var<T> grad_v(const Var<T>& img) { return image_gradient(img, GradientKind::kVertical); }
template <typename T>
Var<T> laplacian(const Var<T>& img) { return image_gradient(img, GradientKind::kLaplacian); }

/// Frozen image -> feature mapping. Either the seeded desk stack or any
/// conv/pool network loaded from a checkpoint (e.g. a face network cut at pool5).
template <typename T>
class FeatureExtractor {
 public:
  explicit FeatureExtractor(arch::Network<T> net) : net_(std::move(net)) {
    require(net_.spec().in_channels() == 3, "feature extractor must take 3 input channels");
    net_.params().set_requires_grad(false);
  }

  static constexpr std::uint64_t kDeskSeed = 0x5EEDF00D;

  static FeatureExtractor desk(std::uint64_t seed = kDeskSeed) {
    return FeatureExtractor(
        arch::Network<T>::init(arch::build_feature_extractor(), seed, arch::InitScheme::kHeUniform));
  }

  static FeatureExtractor from_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    require(!ckpt.modules.empty(), "feature checkpoint has no modules");
    return FeatureExtractor(ckpt.modules.front().network().template cast<T>());
  }

  Var<T> operator()(const Var<T>& img) const { return net_.forward(img, arch::Mode::kDeterministic, nullptr); }

  const arch::Network<T>& network() const { return net_; }

 private:
  arch::Network<T> net_;
};

/// Three independent Confidence Blocks, indexed by GradientKind.
template <typename T>
struct ConfidenceBlocks {
  std::array<arch::Network<T>, 3> nets;

  static ConfidenceBlocks init(std::uint64_t seed) {
    ConfidenceBlocks cb;
    for (std::size_t i = 0; i < 3; ++i)
      cb.nets[i] = arch::Network<T>::init(arch::build_confidence_block(), derive_seed(seed, i));
    return cb;
  }

  static constexpr std::array<const char*, 3> kNames = {"cb_h", "cb_v", "cb_s"};
};

template <typename T>
struct ConfidenceResult {
  Var<T> loss;
  std::array<Var<T>, 3> maps;   // C_h, C_v, C_s
  std::array<Var<T>, 3> terms;  // per-gradient contribution
};

template <typename T>
ConfidenceResult<T> confidence_loss(const Var<T>& clean, const Var<T>& restored, const ConfidenceBlocks<T>& cbs,
                                    double lambda_c) {
  require(clean.value().same_shape(restored.value()),
          "confidence_loss: shape mismatch " + clean.value().shape_str() + " vs " + restored.value().shape_str());
  require(lambda_c >= 0, "lambda_c must be nonnegative");
  ConfidenceResult<T> r;
  for (std::size_t i = 0; i < 3; ++i) {
    const Var<T> g_ref = image_gradient(clean, kGradientKinds[i]);
    const Var<T> g_hat = image_gradient(restored, kGradientKinds[i]);
    r.maps[i] = cbs.nets[i].forward(nn::concat_channels<T>({g_ref, g_hat}), arch::Mode::kDeterministic, nullptr);
    r.terms[i] = nn::confidence_weighted_l1(r.maps[i], g_hat, g_ref, lambda_c, kConfidenceEps);
    r.loss = i == 0 ? r.terms[i] : nn::add(r.loss, r.terms[i]);
  }
  return r;
}

/// Squared feature distance divided by the feature element count.
template <typename T>
Var<T> perceptual_loss(const FeatureExtractor<T>& f, const Var<T>& clean, const Var<T>& restored) {
  require(clean.value().same_shape(restored.value()), "perceptual_loss: shape mismatch");
  return nn::mse_mean(f(restored), f(clean));
}

/// Mean absolute difference over all pixels and channels.
template <typename T>
Var<T> l1_loss(const Var<T>& clean, const Var<T>& restored) {
  return nn::l1_mean(restored, clean);
}

template <typename T>
struct TotalLoss {
  Var<T> total;
  double l1 = 0, lg = 0, lp = 0, lfinal = 0;
  std::array<Var<T>, 3> confidence_maps;  // undefined when lambda_g == 0
};

/// L_1 + lambda_g L_g + lambda_p L_p. Terms whose weight is zero are not evaluated.
template <typename T>
TotalLoss<T> total_loss(const Var<T>& clean, const Var<T>& restored, const ConfidenceBlocks<T>* cbs,
                        const FeatureExtractor<T>* features, const LossWeights& w) {
  w.validate();
  TotalLoss<T> out;
  Var<T> l1 = l1_loss(clean, restored);
  out.l1 = static_cast<double>(l1.value().item());
  out.total = l1;
  if (w.lambda_g > 0) {
    require(cbs != nullptr, "lambda_g > 0 needs confidence blocks");
    auto cr = confidence_loss(clean, restored, *cbs, w.lambda_c);
    out.lg = static_cast<double>(cr.loss.value().item());
    out.confidence_maps = cr.maps;
    out.total = nn::add(out.total, nn::scale(cr.loss, static_cast<T>(w.lambda_g)));
  }
  if (w.lambda_p > 0) {
    require(features != nullptr, "lambda_p > 0 needs a feature extractor");
    Var<T> lp = perceptual_loss(*features, clean, restored);
    out.lp = static_cast<double>(lp.value().item());
    out.total = nn::add(out.total, nn::scale(lp, static_cast<T>(w.lambda_p)));
  }
  out.lfinal = static_cast<double>(out.total.value().item());
  return out;
}

}  // namespace tdrn::losses
