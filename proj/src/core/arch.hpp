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

// Network descriptors (DBN, GDRN, TDRN, Confidence Block, desk feature
// extractor) and a small interpreter that runs them on top of the autograd ops.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ops.hpp"

namespace tdrn::arch {

using nn::Tensor;
using nn::Var;

struct Res2BlockSpec {
  int in = 0;
  int out = 0;
  int scale = 4;

  /// Scale degrades to 1 (one 3x3 over all channels) when out is not a multiple of scale.
  int effective_scale() const { return (scale > 1 && out >= scale && out % scale == 0) ? scale : 1; }
  int group_width() const { return out / effective_scale(); }
  void validate() const;
};

enum class LayerKind { kConv3x3, kRes2Block, kDownsample, kUpsample, kSigmoid };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv3x3;
  int in = 0;   // channels; zero for shape-preserving layers
  int out = 0;
  int scale = 4;
  bool dropout = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// The output of layer `from` is added to the input of layer `to`.
struct SkipSpec {
  int from = 0;
  int to = 0;
  friend bool operator==(const SkipSpec&, const SkipSpec&) = default;
};

struct NetworkSpec {
  std::string name;
  double dropout_rate = 0.0;
  std::vector<LayerSpec> layers;
  std::vector<SkipSpec> skips;

  int in_channels() const;
  int out_channels() const;
  int downsample_count() const;
  int count(LayerKind kind) const;

  /// Throws kInvalidArgument when channels do not chain, skips pair
  /// mismatched stages, or down/up counts differ.
  void validate() const;

  /// Versioned text descriptor; parse(describe()) == *this.
  std::string describe() const;
  static NetworkSpec parse(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline constexpr double kDefaultDropout = 0.2;

NetworkSpec build_dbn(double dropout_rate = kDefaultDropout);
NetworkSpec build_gdrn(double dropout_rate = kDefaultDropout);
/// in_channels 5 is the full network (T | b | d); 3 and 4 are the ablation base networks.
NetworkSpec build_tdrn(int in_channels = 5);
NetworkSpec build_confidence_block();
NetworkSpec build_feature_extractor();

struct ParamShape {
  std::string name;
  std::array<int, 4> shape;
  int fan_in = 0;
  bool is_bias = false;

  std::size_t count() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
  }
};

/// Learnable tensors of one Res2Block in creation order (conv_in, groups, conv_out, proj).
std::vector<ParamShape> res2block_param_shapes(const Res2BlockSpec& spec, const std::string& prefix);
std::vector<ParamShape> parameter_shapes(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

enum class InitScheme {
  kFanInUniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases
  kHeUniform,     // U(-sqrt(6/fan_in), sqrt(6/fan_in)) weights, zero biases
};

enum class Mode { kTrain, kMcSample, kDeterministic };

/// Named tensors in creation order.
template <typename T>
class ParameterSet {
 public:
  void add(const std::string& name, Tensor<T> value, bool requires_grad = true) {
    require(!index_.contains(name), "duplicate parameter name " + name);
    index_.emplace(name, vars_.size());
    names_.push_back(name);
    vars_.emplace_back(std::move(value), requires_grad);
  }

  const Var<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "missing parameter " + name);
    return vars_[it->second];
  }
  Var<T>& get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "missing parameter " + name);
    return vars_[it->second];
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return vars_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Var<T>>& vars() { return vars_; }
  const std::vector<Var<T>>& vars() const { return vars_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : vars_) n += v.value().size();
    return n;
  }

  void set_requires_grad(bool r) {
    for (auto& v : vars_) v.set_requires_grad(r);
  }
  void zero_grad() {
    for (auto& v : vars_) v.zero_grad();
  }

  /// FNV-1a over names and raw value bytes.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ULL;
      }
    };
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      mix(names_[i].data(), names_[i].size());
      mix(vars_[i].value().data.data(), vars_[i].value().size() * sizeof(T));
    }
    return h;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < vars_.size(); ++i)
      out.add(names_[i], vars_[i].value().template cast<U>(), vars_[i].requires_grad());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Var<T>> vars_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
ParameterSet<T> init_parameters(const NetworkSpec& spec, std::uint64_t seed,
                                InitScheme scheme = InitScheme::kFanInUniform) {
  Rng rng(seed);
  ParameterSet<T> params;
  for (const auto& ps : parameter_shapes(spec)) {
    Tensor<T> t(ps.shape[0], ps.shape[1], ps.shape[2], ps.shape[3]);
    double bound = 1.0 / std::sqrt(static_cast<double>(ps.fan_in));
    if (scheme == InitScheme::kHeUniform) bound = ps.is_bias ? 0.0 : std::sqrt(6.0 / ps.fan_in);
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    params.add(ps.name, std::move(t));
  }
  return params;
}

template <typename T>
Var<T> conv_layer(const ParameterSet<T>& params, const std::string& prefix, const Var<T>& x) {
  return nn::conv2d(x, params.get(prefix + ".weight"), params.get(prefix + ".bias"));
}

/// 1x1 conv m->n, ReLU; split into s groups; group 1 passes through, group
/// i >= 2 is ReLU(conv3x3(x_i + y_{i-1})); concat; 1x1 conv n->n; plus the
/// identity (or 1x1 projection when m != n). No activation after the merge.
template <typename T>
Var<T> res2block_forward(const Res2BlockSpec& spec, const ParameterSet<T>& params, const std::string& prefix,
                         const Var<T>& x) {
  const int s = spec.effective_scale();
  const int width = spec.group_width();
  Var<T> h = nn::relu(conv_layer(params, prefix + ".conv_in", x));
  Var<T> mixed;
  if (s == 1) {
    mixed = nn::relu(conv_layer(params, prefix + ".conv_mid", h));
  } else {
    std::vector<Var<T>> groups;
    groups.reserve(s);
    groups.push_back(nn::slice_channels(h, 0, width));
    for (int i = 1; i < s; ++i) {
      Var<T> xi = nn::add(nn::slice_channels(h, i * width, width), groups.back());
      groups.push_back(nn::relu(conv_layer(params, prefix + ".group" + std::to_string(i + 1), xi)));
    }
    mixed = nn::concat_channels(groups);
  }
  Var<T> merged = conv_layer(params, prefix + ".conv_out", mixed);
  Var<T> skip = spec.in == spec.out ? x : conv_layer(params, prefix + ".proj", x);
  return nn::add(merged, skip);
}

std::string layer_prefix(std::size_t index);

/// A NetworkSpec bound to parameters.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, ParameterSet<T> params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    const auto shapes = parameter_shapes(spec_);
    require(shapes.size() == params_.size(), "parameter count does not match architecture '" + spec_.name + "'");
    for (const auto& ps : shapes) {
      require(params_.contains(ps.name), "missing parameter " + ps.name + " for '" + spec_.name + "'");
      const auto& v = params_.get(ps.name).value();
      require(v.n == ps.shape[0] && v.c == ps.shape[1] && v.h == ps.shape[2] && v.w == ps.shape[3],
              "parameter " + ps.name + " has shape " + v.shape_str());
    }
  }

  static Network init(const NetworkSpec& spec, std::uint64_t seed, InitScheme scheme = InitScheme::kFanInUniform) {
    return Network(spec, init_parameters<T>(spec, seed, scheme));
  }

  const NetworkSpec& spec() const { return spec_; }
  void set_dropout_rate(double p) {
    require(p >= 0.0 && p < 1.0, "dropout rate must lie in [0,1)");
    spec_.dropout_rate = p;
  }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  /// Runs the layer list. Dropout layers draw masks from rng in kTrain and
  /// kMcSample modes; rng may be null in kDeterministic mode.
  Var<T> forward(const Var<T>& x, Mode mode, Rng* rng) const {
    const auto& in = x.value();
    require(in.c == spec_.in_channels(), "'" + spec_.name + "' expects " + std::to_string(spec_.in_channels()) +
                                             " input channels, got " + std::to_string(in.c));
    const bool has_up = spec_.count(LayerKind::kUpsample) > 0;
    const int factor = 1 << spec_.downsample_count();
    if (has_up)
      require(in.h % factor == 0 && in.w % factor == 0,
              "'" + spec_.name + "' needs spatial size divisible by " + std::to_string(factor) + ", got " +
                  std::to_string(in.h) + "x" + std::to_string(in.w));
    const bool use_dropout = mode != Mode::kDeterministic && spec_.dropout_rate > 0.0;
    require(!use_dropout || rng != nullptr, "dropout mode needs an rng");

    std::vector<std::vector<int>> incoming(spec_.layers.size());
    std::vector<bool> is_source(spec_.layers.size(), false);
    for (const auto& sk : spec_.skips) {
      incoming[sk.to].push_back(sk.from);
      is_source[sk.from] = true;
    }
    std::vector<Var<T>> saved(spec_.layers.size());

    Var<T> h = x;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const LayerSpec& layer = spec_.layers[i];
      for (int from : incoming[i]) h = nn::add(h, saved[from]);
      const std::string prefix = layer_prefix(i);
      switch (layer.kind) {
        case LayerKind::kConv3x3: h = nn::relu(conv_layer(params_, prefix + ".conv", h)); break;
        case LayerKind::kRes2Block:
          h = res2block_forward(Res2BlockSpec{layer.in, layer.out, layer.scale}, params_, prefix, h);
          break;
        case LayerKind::kDownsample:
          if (h.value().h >= 2 && h.value().w >= 2) h = nn::avg_pool2(h);
          break;
        case LayerKind::kUpsample: h = nn::upsample2(h); break;
        case LayerKind::kSigmoid: h = nn::sigmoid(h); break;
      }
      if (layer.dropout && use_dropout) h = nn::dropout(h, spec_.dropout_rate, *rng);
      if (is_source[i]) saved[i] = h;
    }
    return h;
  }

  template <typename U>
  Network<U> cast() const {
    return Network<U>(spec_, params_.template cast<U>());
  }

 private:
  NetworkSpec spec_;
  ParameterSet<T> params_;
};

}  // namespace tdrn::arch
