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

// Synthetic turbulence degradation: T = clamp01(D(H(I)) + noise).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "image.hpp"
#include "rng.hpp"

namespace tdrn::turbsim {

/// Square, odd-sized, nonnegative point-spread function summing to one.
class BlurKernel {
 public:
  BlurKernel(int size, std::vector<double> weights);

  static BlurKernel identity();

  int size() const { return size_; }
  double at(int y, int x) const { return weights_[static_cast<std::size_t>(y) * size_ + x]; }
  const std::vector<double>& weights() const { return weights_; }
  int support_count() const;

 private:
  int size_;
  std::vector<double> weights_;
};

enum class BlurKind { kIdentity, kGaussian, kMotion };

std::string to_string(BlurKind kind);
BlurKind blur_kind_from_string(const std::string& s);

struct BlurSpec {
  BlurKind kind = BlurKind::kIdentity;
  int size = 1;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double theta = 0.0;

  static BlurSpec identity() { return {}; }
  static BlurSpec gaussian(int size, double sx, double sy, double theta) {
    return {BlurKind::kGaussian, size, sx, sy, theta};
  }
  static BlurSpec motion(int size) { return {BlurKind::kMotion, size, 0.0, 0.0, 0.0}; }

  friend bool operator==(const BlurSpec&, const BlurSpec&) = default;
};

struct DegradationConfig {
  double sigma = 16.0;   // bump envelope std, pixels
  double eta = 0.15;     // bump amplitude std, pixels
  int patch_count = 4;   // bumps per iteration
  int iterations = 1000; // M
  double noise_std = 0.02;
  BlurSpec blur = BlurSpec::identity();
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const DegradationConfig&, const DegradationConfig&) = default;
};

/// Per-pixel backward-warp displacement in pixels.
struct DeformationField {
  int height = 0;
  int width = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  DeformationField() = default;
  DeformationField(int h, int w) : height(h), width(w), dx(static_cast<std::size_t>(h) * w, 0.0), dy(dx) {}

  double rms() const;
};

/// What was sampled for one degraded image.
struct DegradationRecord {
  BlurSpec blur;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::uint64_t kernel_seed = 0;
  std::uint64_t field_seed = 0;
  std::uint64_t noise_seed = 0;
};

BlurKernel gen_gaussian_kernel(int size, double sigma_x, double sigma_y, double theta);

/// Random camera-shake trajectory (velocity random walk with impulsive
/// turns) splatted bilinearly onto a size x size grid.
BlurKernel gen_motion_kernel(int size, Rng& rng);

BlurKernel make_kernel(const BlurSpec& spec, std::uint64_t kernel_seed);

/// Per-channel 2-D convolution with reflect-101 boundary handling.
Image apply_blur(const Image& img, const BlurKernel& k);

DeformationField gen_deformation_field(int height, int width, const DegradationConfig& cfg, Rng& rng);

/// Backward bilinear warp; sample positions are clamped to the image.
Image warp(const Image& img, const DeformationField& field);

struct Degraded {
  Image image;
  DegradationRecord record;
};

/// blur -> deform -> additive Gaussian noise -> clamp to [0,1].
Degraded degrade(const Image& img, const DegradationConfig& cfg);

/// 8 isotropic + 8 anisotropic Gaussian specs with std drawn from [1,4].
std::vector<BlurSpec> gaussian_kernel_bank(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset generation

/// One manifest line. Field order on disk:
/// distorted_path, clean_path, blur_kind, kernel_params, M, seed.
struct ManifestRecord {
  std::string distorted_path;  // relative to the manifest directory
  std::string clean_path;
  BlurSpec blur;
  int iterations = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::filesystem::path root;  // directory the relative paths resolve against
  std::vector<ManifestRecord> records;

  std::filesystem::path distorted(std::size_t i) const { return root / records[i].distorted_path; }
  std::filesystem::path clean(std::size_t i) const { return root / records[i].clean_path; }
};

std::string manifest_line(const ManifestRecord& r);
ManifestRecord parse_manifest_line(const std::string& line);

void write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

struct DatasetOptions {
  int image_size = 128;
  std::uint64_t master_seed = 0;
  std::string manifest_name = "manifest.jsonl";
  std::string distorted_dir = "distorted";
};

/// Crops/resizes every readable image in clean_dir and writes one degraded
/// image per (image, config) pair. Record r uses seed derive_seed(master, r)
/// where r = image_index * grid.size() + config_index over the sorted file list.
Manifest generate_dataset(const std::filesystem::path& clean_dir, const std::vector<DegradationConfig>& grid,
                          const std::filesystem::path& out_dir, const DatasetOptions& opts);

}  // namespace tdrn::turbsim
