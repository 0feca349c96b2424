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

// Image quality metrics, feature distance, top-k identification and the
// per-dataset report.

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "convert.hpp"
#include "image.hpp"
#include "losses.hpp"
#include "turbsim.hpp"

namespace tdrn::eval {

inline constexpr double kPsnrCap = 100.0;

double mse(const Image& a, const Image& b);

/// 10 log10(1 / MSE) for [0,1] images; identical images report kPsnrCap.
double psnr(const Image& a, const Image& b);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Luma (0.299, 0.587, 0.114) plane used by ssim().
std::vector<double> luminance(const Image& img);

/// Mean of the local SSIM map over every fully contained Gaussian window of the luma plane.
double ssim(const Image& a, const Image& b, const SsimParams& p = {});

/// Root-mean-square difference of F(a) and F(b).
template <typename T>
double feature_distance(const losses::FeatureExtractor<T>& f, const Image& a, const Image& b) {
  require(a.same_shape(b), "feature_distance: shape mismatch");
  nn::NoGradGuard no_grad;
  const auto fa = f(nn::Var<T>(to_tensor<T>(a))).value();
  const auto fb = f(nn::Var<T>(to_tensor<T>(b))).value();
  double s = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double d = static_cast<double>(fa.data[i]) - static_cast<double>(fb.data[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(fa.size()));
}

/// Flattened features, used as a deterministic stand-in identity embedding.
template <typename T>
std::vector<double> embed(const losses::FeatureExtractor<T>& f, const Image& img) {
  nn::NoGradGuard no_grad;
  const auto feat = f(nn::Var<T>(to_tensor<T>(img))).value();
  return {feat.data.begin(), feat.data.end()};
}

struct LabeledEmbedding {
  std::string label;
  std::vector<double> embedding;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Fraction of probes whose label is among the k most cosine-similar gallery
/// entries; equal similarities keep gallery order.
std::map<int, double> top_k_accuracy(const std::vector<LabeledEmbedding>& probes,
                                     const std::vector<LabeledEmbedding>& gallery, const std::vector<int>& ks);

struct MetricRow {
  std::string id;
  double psnr = 0, ssim = 0, dvgg = 0;
};

inline const std::vector<std::string> kAllMetrics = {"psnr", "ssim", "dvgg"};

struct MetricReport {
  std::string dataset;
  std::string checkpoints;
  std::string config_checksum;
  std::vector<std::string> metrics = kAllMetrics;  // columns that were computed
  std::vector<MetricRow> rows;
  std::map<int, double> top_k;  // identification accuracy of restored probes against the clean gallery
  std::size_t skipped = 0;

  bool has(const std::string& metric) const;

  double mean_psnr() const;
  double mean_ssim() const;
  double mean_dvgg() const;

  std::string table() const;
  std::string json() const;
};

/// Writes `path` (table) and `path`.json (same fields).
void write_report(const MetricReport& report, const std::filesystem::path& path);

/// Restores manifest record `index` from its distorted image.
using RestoreFn = std::function<Image(const Image& distorted, std::size_t index)>;

struct EvalOptions {
  std::vector<std::string> metrics = kAllMetrics;
  std::vector<int> ks;  // empty: no identification
};

/// Scores restore(distorted) against clean for every record. Records whose
/// files are missing are logged and skipped; zero usable records is an error.
/// With ks set, each restored image is a probe labelled by its clean path and
/// the distinct clean images form the gallery.
MetricReport evaluate_dataset(const turbsim::Manifest& manifest, const RestoreFn& restore,
                              const losses::FeatureExtractor<float>& features, const EvalOptions& opts = {});

}  // namespace tdrn::eval
