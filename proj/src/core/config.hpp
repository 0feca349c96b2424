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

// Run configuration: one JSON document with sections data, degrade, train,
// priors, loss and eval. Unknown keys are rejected; to_json() writes every
// field, so an echoed config parses back to the same RunConfig.

#include <cstdint>
#include <string>
#include <vector>

#include "train.hpp"
#include "turbsim.hpp"

namespace tdrn::config {

struct DataConfig {
  std::string clean_dir;
  std::string dataset_dir;  // output of degrade; holds manifest.jsonl, deblur.jsonl, dewarp.jsonl
  std::string test_dir;     // held-out dataset for evaluate / ablate
  int image_size = 128;
};

struct DegradeConfig {
  std::uint64_t master_seed = 0;
  double sigma = 16.0;
  double eta = 0.15;
  int patch_count = 4;
  double noise_std = 0.02;
  std::vector<int> iterations = {1000, 4000, 7000, 10000, 13000, 16000, 19000};  // M grid
  std::vector<turbsim::BlurSpec> blurs = turbsim::gaussian_kernel_bank(0);

  /// Cartesian product blurs x iterations, iterations varying fastest.
  std::vector<turbsim::DegradationConfig> grid() const;
};

struct TrainSection {
  train::TrainConfig dbn = train::default_config("dbn");
  train::TrainConfig gdrn = train::default_config("gdrn");
  train::TrainConfig tdrn = train::default_config("tdrn");
  std::string dbn_checkpoint;
  std::string gdrn_checkpoint;
  std::string tdrn_checkpoint;

  train::TrainConfig& get(const std::string& which);
  const train::TrainConfig& get(const std::string& which) const;
};

struct PriorsConfig {
  int samples = priors::kDefaultSamples;
  double dropout_rate = arch::kDefaultDropout;
};

struct EvalConfig {
  std::vector<std::string> metrics = {"psnr", "ssim", "dvgg"};
  std::vector<int> ks = {1, 3, 5};
  std::uint64_t seed = 0;
  std::string feature_checkpoint;  // empty: seeded desk extractor
};

struct RunConfig {
  DataConfig data;
  DegradeConfig degrade;
  TrainSection train;
  PriorsConfig priors;
  losses::LossWeights loss;
  EvalConfig eval;

  /// Throws kConfig on malformed JSON, unknown keys, wrong types or invalid values.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json() const;

  /// Sets one value by dotted path (e.g. "train.tdrn.iterations"); value is JSON text.
  void set(const std::string& dotted_key, const std::string& json_value);

  /// FNV-1a of to_json(), 16 hex digits.
  std::string checksum() const;

  void validate() const;

  /// TrainConfig for `which` with S and loss weights filled in from their sections.
  train::TrainConfig resolved_train(const std::string& which) const;
};

/// Applies --seed: degrade.master_seed, every train seed and eval.seed.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace tdrn::config
