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

// Training loops for the prior networks (DBN, GDRN) and the restoration
// network, the restoration procedure, and the ablation runner.

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "image.hpp"
#include "losses.hpp"
#include "optim.hpp"
#include "priors.hpp"
#include "turbsim.hpp"

namespace tdrn::train {

enum class Role { kDeblur, kDewarp, kDeturbulence };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

/// (input, target) pairs. File-backed pairs are read on first access and
/// cached; every image must match the size of the first one loaded.
class PairDataset {
 public:
  static PairDataset from_manifest(const turbsim::Manifest& manifest, Role role);
  static PairDataset from_images(std::vector<Image> inputs, std::vector<Image> targets, Role role);

  Role role() const { return role_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const Image& input(std::size_t i) const;
  const Image& target(std::size_t i) const;

 private:
  struct Entry {
    std::filesystem::path input_path, target_path;
    mutable std::optional<Image> input, target;
  };
  const Image& load(const std::filesystem::path& path, std::optional<Image>& slot) const;

  Role role_ = Role::kDeturbulence;
  std::vector<Entry> entries_;
  mutable int height_ = 0, width_ = 0;
};

inline constexpr int kDefaultRestorerIterations = 100000;
inline constexpr int kDefaultTdrnIterations = 150000;

struct TrainConfig {
  optim::AdamConfig adam;
  int batch_size = 10;
  int iterations = kDefaultTdrnIterations;
  int samples = priors::kDefaultSamples;  // S
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // 0: only after the last iteration
  losses::LossWeights loss;

  void validate() const;
};

/// Paper-scale defaults for "dbn", "gdrn" or "tdrn".
TrainConfig default_config(const std::string& which);

struct LossRecord {
  std::uint64_t iter = 0;
  double l1 = 0, lg = 0, lp = 0, lfinal = 0;
  double wall_ms = 0;
};

/// {"iter":..,"L1":..,"Lg":..,"Lp":..,"Lfinal":..,"wall_ms":..}
std::string loss_line(const LossRecord& r);
LossRecord parse_loss_line(const std::string& line);
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

struct RunIO {
  std::filesystem::path run_dir;      // empty: nothing is written
  std::filesystem::path resume_from;  // checkpoint to continue from
  std::function<void(const LossRecord&)> on_iteration;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> log;  // iterations executed by this call
  std::filesystem::path checkpoint_path;
};

std::string checkpoint_filename(const std::string& name, std::uint64_t iteration);
inline constexpr const char* kLossLogName = "loss_log.jsonl";

/// L1 training of "dbn" or "gdrn" with dropout active.
TrainResult train_restorer(const std::string& which, const PairDataset& ds, const TrainConfig& cfg,
                           double dropout_rate = arch::kDefaultDropout, const RunIO& io = {});

struct TdrnVariant {
  std::string label;
  int in_channels = 5;           // 3: T, 4: T|b, 5: T|b|d
  bool confidence_loss = true;   // false: L1 + lambda_p Lp
};

inline const std::array<TdrnVariant, 4> kAblationVariants = {{
    {"Base Network (BN)", 3, false},
    {"+ b blur-prior", 4, false},
    {"+ both priors (b and d)", 5, false},
    {"TDRN w/ L_final", 5, true},
}};

/// Seed of the MC passes used for training image i.
std::uint64_t prior_seed(std::uint64_t train_seed, std::size_t index);

/// Trains TDRN (and the confidence blocks when the variant uses L_g) on
/// frozen prior networks. dbn/gdrn may be null when the variant does not use them.
TrainResult train_tdrn(const PairDataset& ds, const arch::Network<float>* dbn, const arch::Network<float>* gdrn,
                       const TrainConfig& cfg, const RunIO& io = {}, const TdrnVariant& variant = kAblationVariants[3],
                       const losses::FeatureExtractor<float>* features = nullptr);

/// Network input: T, then b and d as needed by in_channels.
nn::Tensor<float> network_input(const Image& distorted, const priors::Priors* p, int in_channels);

/// Priors needed for in_channels, MC passes seeded by rng (dbn stream first, then gdrn).
priors::Priors priors_for(const arch::Network<float>* dbn, const arch::Network<float>* gdrn, const Image& img,
                          int in_channels, int samples, Rng& rng);

/// Restoration with an already-loaded set of networks.
struct Restorer {
  std::optional<arch::Network<float>> dbn, gdrn;
  arch::Network<float> tdrn;

  /// tdrn_ckpt holds a module named "tdrn"; prior checkpoints may be empty
  /// paths when the stored network takes no priors.
  static Restorer load(const std::filesystem::path& dbn_ckpt, const std::filesystem::path& gdrn_ckpt,
                       const std::filesystem::path& tdrn_ckpt);

  Image operator()(const Image& distorted, int samples, std::uint64_t seed) const;
};

Image restore(const Image& distorted, const arch::Network<float>* dbn, const arch::Network<float>* gdrn,
              const arch::Network<float>& tdrn, int samples, std::uint64_t seed);

struct AblationRow {
  std::string label;
  double psnr = 0, ssim = 0, dvgg = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;  // distorted baseline first, then the variants

  std::string table() const;
  std::string json() const;
};

struct AblationConfig {
  TrainConfig tdrn;      // shared by all variants
  int eval_samples = priors::kDefaultSamples;
  std::uint64_t eval_seed = 0;
};

/// Trains every variant of kAblationVariants from the same seed and scores it on `test`.
AblationReport run_ablation(const PairDataset& train, const PairDataset& test, const arch::Network<float>& dbn,
                            const arch::Network<float>& gdrn, const AblationConfig& cfg,
                            const losses::FeatureExtractor<float>& features,
                            const std::filesystem::path& run_dir = {});

}  // namespace tdrn::train
