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

#include "priors.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

#include "convert.hpp"

namespace tdrn::priors {

double PriorMap::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double PriorMap::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

SampleSet mc_sample(const arch::Network<float>& net, const Image& input, int samples, Rng& rng) {
  require(samples >= 1, "number of MC samples S must be >= 1, got " + std::to_string(samples));
  nn::NoGradGuard no_grad;
  const nn::Var<float> x(to_tensor<float>(input));
  SampleSet out;
  out.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    Rng pass = rng.split();
    out.push_back(net.forward(x, arch::Mode::kMcSample, &pass).value());
  }
  return out;
}

PriorMap pixel_variance(const SampleSet& samples) {
  require(!samples.empty(), "pixel_variance needs at least one sample");
  const auto& first = samples.front();
  for (const auto& s : samples)
    require(s.same_shape(first), "pixel_variance: sample shapes differ (" + s.shape_str() + " vs " +
                                     first.shape_str() + ")");
  require(first.n == 1, "pixel_variance expects single-image samples");
  const std::size_t hw = first.plane();
  const double count = static_cast<double>(samples.size());
  PriorMap map{first.h, first.w, std::vector<double>(hw, 0.0)};
  for (int c = 0; c < first.c; ++c) {
    for (std::size_t p = 0; p < hw; ++p) {
      double mean = 0.0;
      for (const auto& s : samples) mean += static_cast<double>(s.ptr(0, c)[p]);
      mean /= count;
      double var = 0.0;
      for (const auto& s : samples) {
        const double d = static_cast<double>(s.ptr(0, c)[p]) - mean;
        var += d * d;
      }
      map.values[p] += var / count;
    }
  }
  for (double& v : map.values) v /= first.c;
  return map;
}

Priors estimate_priors(const arch::Network<float>& dbn, const arch::Network<float>& gdrn, const Image& input,
                       int samples, Rng& rng) {
  Rng dbn_rng = rng.split();
  Rng gdrn_rng = rng.split();
  Priors p;
  p.blur = pixel_variance(mc_sample(dbn, input, samples, dbn_rng));
  p.distortion = pixel_variance(mc_sample(gdrn, input, samples, gdrn_rng));
  return p;
}

void write_prior_png(const PriorMap& map, const std::filesystem::path& path) {
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  const double range = *hi - *lo;
  std::vector<double> scaled(map.values.size(), 0.0);
  if (range > 0)
    for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = (map.values[i] - *lo) / range;
  write_png_gray(scaled, map.height, map.width, path);
  nlohmann::ordered_json j;
  j["min"] = *lo;
  j["max"] = *hi;
  j["mapping"] = "pixel = (value - min) / (max - min)";
  std::ofstream(path.string() + ".json") << j.dump(2) << '\n';
}

}  // namespace tdrn::priors
