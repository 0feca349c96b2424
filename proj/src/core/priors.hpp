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

// Blur / distortion priors: per-pixel predictive variance of a dropout
// network over S stochastic forward passes.

#include <filesystem>
#include <vector>

#include "arch.hpp"
#include "image.hpp"

namespace tdrn::priors {

inline constexpr int kDefaultSamples = 10;

/// Single-channel nonnegative map.
struct PriorMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double mean() const;
  double max() const;
};

/// S network outputs for one input, each (1,3,H,W).
using SampleSet = std::vector<nn::Tensor<float>>;

/// S forward passes in Mode::kMcSample; pass i uses the i-th child stream split from rng.
SampleSet mc_sample(const arch::Network<float>& net, const Image& input, int samples, Rng& rng);

/// Population variance per pixel and channel, averaged over channels.
PriorMap pixel_variance(const SampleSet& samples);

struct Priors {
  PriorMap blur;        // b, from the deblurring network
  PriorMap distortion;  // d, from the distortion-removal network
};

/// b from dbn, d from gdrn; each network gets its own child stream of rng.
Priors estimate_priors(const arch::Network<float>& dbn, const arch::Network<float>& gdrn, const Image& input,
                       int samples, Rng& rng);

/// Debug dump: min/max rescaled to [0,1], grey PNG plus "<path>.json" with the rescale.
void write_prior_png(const PriorMap& map, const std::filesystem::path& path);

}  // namespace tdrn::priors
