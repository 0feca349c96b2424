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

// Checkpoint container. Layout (all integers and reals little-endian):
//
//   "TDRNCKPT" u32 version
//   u32 module_count, per module:
//     str name, str architecture descriptor,
//     u32 tensor_count, per tensor: str name, i32 dims[4], f32 data[]
//   str optimizer kind, f64 lr, beta1, beta2, epsilon, u64 step
//   u32 slot_count, per slot: str name, tensor m, tensor v
//   u64 iteration, u64 rng_state[4]
//   u64 FNV-1a checksum of every preceding byte
//
// where str is u32 length + UTF-8 bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "arch.hpp"
#include "rng.hpp"

namespace tdrn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, nn::Tensor<float>>>;

struct ModuleState {
  std::string name;
  arch::NetworkSpec spec;
  NamedTensors params;

  static ModuleState from(const std::string& name, const arch::Network<float>& net);
  arch::Network<float> network() const;

  friend bool operator==(const ModuleState&, const ModuleState&) = default;
};

struct OptimizerState {
  std::string kind = "adam";
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  NamedTensors m;
  NamedTensors v;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

struct Checkpoint {
  std::vector<ModuleState> modules;
  OptimizerState optimizer;
  std::uint64_t iteration = 0;
  Rng::State rng{};

  const ModuleState& module(const std::string& name) const;
  bool has_module(const std::string& name) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Layer graph equality; the dropout rate is a runtime knob and is ignored.
bool same_architecture(const arch::NetworkSpec& a, const arch::NetworkSpec& b);

/// Loads and requires the first module to match `expected` (kArchMismatch otherwise).
Checkpoint load_checkpoint(const std::filesystem::path& path, const arch::NetworkSpec& expected);

}  // namespace tdrn
