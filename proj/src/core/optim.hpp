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

// Adam over a fixed list of named float parameters.

#include <cmath>
#include <string>
#include <vector>

#include "autograd.hpp"
#include "checkpoint.hpp"

namespace tdrn::optim {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    require(learning_rate > 0 && std::isfinite(learning_rate), "learning_rate must be > 0");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0,1)");
    require(epsilon > 0, "Adam epsilon must be > 0");
  }
};

class Adam {
 public:
  struct Slot {
    std::string name;
    nn::Var<float> param;
    nn::Tensor<float> m, v;
  };

  explicit Adam(AdamConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  /// Registers a parameter; `name` must be unique and stable across runs.
  void add(const std::string& name, const nn::Var<float>& param) {
    for (const auto& s : slots_) require(s.name != name, "duplicate optimizer slot " + name);
    const auto& p = param.value();
    slots_.push_back({name, param, nn::Tensor<float>(p.n, p.c, p.h, p.w), nn::Tensor<float>(p.n, p.c, p.h, p.w)});
  }

  template <typename Params>
  void add_all(const std::string& prefix, Params& params) {
    for (std::size_t i = 0; i < params.size(); ++i) add(prefix + "/" + params.names()[i], params.vars()[i]);
  }

  void zero_grad() {
    for (auto& s : slots_) s.param.zero_grad();
  }

  /// One update from the gradients currently stored on the parameters.
  /// Parameters without a gradient are treated as having a zero gradient.
  void step() {
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
    const float lr_t = static_cast<float>(cfg_.learning_rate / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(cfg_.epsilon);
    for (auto& s : slots_) {
      auto& w = s.param.mutable_value().data;
      const auto& g = s.param.grad();
      const bool has = g.size() == w.size();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const float gi = has ? g.data[i] : 0.0f;
        s.m.data[i] = b1 * s.m.data[i] + (1.0f - b1) * gi;
        s.v.data[i] = b2 * s.v.data[i] + (1.0f - b2) * gi * gi;
        w[i] -= lr_t * s.m.data[i] / (std::sqrt(s.v.data[i] * inv_c2) + eps);
      }
    }
  }

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Slot>& slots() const { return slots_; }

  OptimizerState state() const {
    OptimizerState st;
    st.kind = "adam";
    st.learning_rate = cfg_.learning_rate;
    st.beta1 = cfg_.beta1;
    st.beta2 = cfg_.beta2;
    st.epsilon = cfg_.epsilon;
    st.step = step_;
    for (const auto& s : slots_) {
      st.m.emplace_back(s.name, s.m);
      st.v.emplace_back(s.name, s.v);
    }
    return st;
  }

  /// Restores moments by slot name; the slot set must match exactly.
  void load_state(const OptimizerState& st) {
    if (st.kind != "adam") fail(ErrorCode::kArchMismatch, "optimizer kind '" + st.kind + "' is not adam");
    if (st.m.size() != slots_.size() || st.v.size() != slots_.size())
      fail(ErrorCode::kArchMismatch, "optimizer state has " + std::to_string(st.m.size()) + " slots, expected " +
                                         std::to_string(slots_.size()));
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      auto& s = slots_[i];
      if (st.m[i].first != s.name || st.v[i].first != s.name || !st.m[i].second.same_shape(s.m) ||
          !st.v[i].second.same_shape(s.v))
        fail(ErrorCode::kArchMismatch, "optimizer slot mismatch at " + s.name);
      s.m = st.m[i].second;
      s.v = st.v[i].second;
    }
    step_ = st.step;
  }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace tdrn::optim
