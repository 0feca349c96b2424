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

// End-to-end commands: degrade, train, restore, evaluate, ablate, synth.
// Each writes into one run directory that also holds the resolved config.

#include <cstdint>
#include <filesystem>
#include <string>

#include "config.hpp"

namespace tdrn::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kRunRootEnv = "TDRN_RUN_ROOT";
inline constexpr const char* kConfigEcho = "config.json";

/// $TDRN_RUN_ROOT (or ./runs) / <label>-<config checksum>.
fs::path default_run_dir(const std::string& label, const config::RunConfig& cfg);

/// Writes the resolved config as <run_dir>/config.json.
void echo_config(const config::RunConfig& cfg, const fs::path& run_dir);

/// File name plus content hash, stable across directories.
std::string file_identity(const fs::path& path);

struct DegradeSummary {
  fs::path manifest;  // deturbulence pairs; deblur.jsonl and dewarp.jsonl sit next to it
  std::size_t images = 0;
  std::size_t records = 0;
  std::string manifest_checksum;
};

/// Writes the (T, I), (H(I), I) and (D(I), I) datasets for every image in clean_dir.
DegradeSummary cmd_degrade(const config::RunConfig& cfg, const fs::path& clean_dir, const fs::path& out_dir);

/// Manifest of `role` inside a degrade output directory.
fs::path role_manifest(const fs::path& dataset_dir, train::Role role);

/// Highest-iteration "<which>_iterNNNNNNNN.ckpt" in run_dir, or empty.
fs::path latest_checkpoint(const fs::path& run_dir, const std::string& which);

struct TrainRequest {
  std::string which;  // dbn | gdrn | tdrn
  fs::path run_dir;
  bool resume = false;
  fs::path resume_from;  // empty with resume: latest checkpoint in run_dir
};

/// Returns the final checkpoint path.
fs::path cmd_train(const config::RunConfig& cfg, const TrainRequest& req);

/// Restores one PNG or every PNG in a directory; returns the number written.
std::size_t cmd_restore(const config::RunConfig& cfg, const fs::path& input, const fs::path& out_dir, int samples,
                        std::uint64_t seed);

struct EvaluateRequest {
  fs::path manifest;      // empty: <test_dir or dataset_dir>/manifest.jsonl
  fs::path out_dir;
  fs::path restored_dir;  // pre-restored images named after the distorted files
  std::string passthrough;  // "clean" or "distorted": score that image as the restoration
};

/// Returns the report path (<out_dir>/report.txt, sidecar report.txt.json).
fs::path cmd_evaluate(const config::RunConfig& cfg, const EvaluateRequest& req);

/// Returns the report path (<run_dir>/ablation.txt, sidecar ablation.json).
fs::path cmd_ablate(const config::RunConfig& cfg, const fs::path& run_dir);

/// Writes `count` synthetic clean faces face_NNN.png; returns the count.
std::size_t cmd_synth(const fs::path& out_dir, int count, int size, std::uint64_t seed);

}  // namespace tdrn::pipeline
