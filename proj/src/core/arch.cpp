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

#include "arch.hpp"

#include <cstdio>
#include <sstream>

namespace tdrn::arch {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kRes2Block: return "res2block";
    case LayerKind::kDownsample: return "downsample";
    case LayerKind::kUpsample: return "upsample";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "?";
}

bool has_channels(LayerKind k) { return k == LayerKind::kConv3x3 || k == LayerKind::kRes2Block; }

LayerSpec res2(int in, int out, bool dropout = false) {
  return {LayerKind::kRes2Block, in, out, 4, dropout};
}
LayerSpec conv3(int in, int out) { return {LayerKind::kConv3x3, in, out, 4, false}; }
LayerSpec down() { return {LayerKind::kDownsample}; }
LayerSpec up() { return {LayerKind::kUpsample}; }

void push_conv(std::vector<ParamShape>& out, const std::string& prefix, int cout, int cin, int k) {
  const int fan_in = cin * k * k;
  out.push_back({prefix + ".weight", {cout, cin, k, k}, fan_in, false});
  out.push_back({prefix + ".bias", {1, cout, 1, 1}, fan_in, true});
}

// Prior networks: dropout after every Res2Block except the output block.
NetworkSpec build_prior_net(const std::string& name, double p) {
  NetworkSpec s;
  s.name = name;
  s.dropout_rate = p;
  s.layers = {res2(3, 64, true), down(), res2(64, 64, true), down()};
  for (int i = 0; i < 5; ++i) s.layers.push_back(res2(64, 64, true));
  s.layers.push_back(up());
  s.layers.push_back(res2(64, 64, true));  // 10
  s.layers.push_back(up());
  s.layers.push_back(res2(64, 16, true));  // 12
  s.layers.push_back(res2(16, 3, false));  // 13
  s.skips = {{2, 10}, {0, 12}};
  s.validate();
  return s;
}

}  // namespace

void Res2BlockSpec::validate() const {
  require(in >= 1 && out >= 1, "Res2Block channels must be >= 1");
  require(scale >= 1, "Res2Block scale must be >= 1");
}

std::string layer_prefix(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "L%02zu", index);
  return buf;
}

int NetworkSpec::in_channels() const {
  for (const auto& l : layers)
    if (has_channels(l.kind)) return l.in;
  return 0;
}

int NetworkSpec::out_channels() const {
  int c = 0;
  for (const auto& l : layers)
    if (has_channels(l.kind)) c = l.out;
  return c;
}

int NetworkSpec::count(LayerKind kind) const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == kind;
  return n;
}

int NetworkSpec::downsample_count() const { return count(LayerKind::kDownsample); }

void NetworkSpec::validate() const {
  require(!layers.empty(), "network '" + name + "' has no layers");
  require(has_channels(layers.front().kind), "network '" + name + "' must start with a conv or Res2Block");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout rate must be in [0,1)");
  const int ups = count(LayerKind::kUpsample);
  require(ups == 0 || ups == downsample_count(), "network '" + name + "': Downsample and Upsample counts differ");

  std::vector<int> in_ch(layers.size()), out_ch(layers.size()), in_lvl(layers.size()), out_lvl(layers.size());
  int ch = layers.front().in;
  int lvl = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    in_ch[i] = ch;
    in_lvl[i] = lvl;
    if (has_channels(l.kind)) {
      require(l.in >= 1 && l.out >= 1, "layer " + std::to_string(i) + " has nonpositive channels");
      require(l.in == ch, "network '" + name + "': layer " + std::to_string(i) + " expects " + std::to_string(l.in) +
                              " channels but receives " + std::to_string(ch));
      ch = l.out;
    }
    if (l.kind == LayerKind::kDownsample) ++lvl;
    if (l.kind == LayerKind::kUpsample) --lvl;
    require(lvl >= 0, "network '" + name + "': upsampling above input resolution");
    out_ch[i] = ch;
    out_lvl[i] = lvl;
  }
  for (const auto& sk : skips) {
    require(sk.from >= 0 && sk.to > sk.from && sk.to < static_cast<int>(layers.size()),
            "network '" + name + "': bad skip " + std::to_string(sk.from) + "->" + std::to_string(sk.to));
    require(out_ch[sk.from] == in_ch[sk.to] && out_lvl[sk.from] == in_lvl[sk.to],
            "network '" + name + "': skip " + std::to_string(sk.from) + "->" + std::to_string(sk.to) +
                " joins mismatched stages");
  }
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  char rate[64];
  std::snprintf(rate, sizeof(rate), "%.17g", dropout_rate);
  os << "tdrn-arch 1\n";
  os << "name " << name << "\n";
  os << "dropout_rate " << rate << "\n";
  for (const auto& l : layers) {
    os << "layer " << kind_name(l.kind);
    if (l.kind == LayerKind::kConv3x3) os << ' ' << l.in << ' ' << l.out;
    if (l.kind == LayerKind::kRes2Block) os << ' ' << l.in << ' ' << l.out << ' ' << l.scale;
    if (l.dropout) os << " dropout";
    os << "\n";
  }
  for (const auto& sk : skips) os << "skip " << sk.from << ' ' << sk.to << "\n";
  os << "end\n";
  return os.str();
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto bad = [](const std::string& why) -> void { fail(ErrorCode::kCorrupt, "architecture descriptor: " + why); };
  if (!std::getline(in, line) || line != "tdrn-arch 1") bad("unsupported header '" + line + "'");
  NetworkSpec s;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "name") {
      ls >> s.name;
    } else if (key == "dropout_rate") {
      ls >> s.dropout_rate;
    } else if (key == "layer") {
      std::string kind;
      ls >> kind;
      LayerSpec l;
      if (kind == "conv3x3") {
        l.kind = LayerKind::kConv3x3;
        ls >> l.in >> l.out;
      } else if (kind == "res2block") {
        l.kind = LayerKind::kRes2Block;
        ls >> l.in >> l.out >> l.scale;
      } else if (kind == "downsample") {
        l.kind = LayerKind::kDownsample;
      } else if (kind == "upsample") {
        l.kind = LayerKind::kUpsample;
      } else if (kind == "sigmoid") {
        l.kind = LayerKind::kSigmoid;
      } else {
        bad("unknown layer kind '" + kind + "'");
      }
      if (!ls) bad("malformed layer line '" + line + "'");
      std::string flag;
      if (ls >> flag) {
        if (flag != "dropout") bad("unknown layer flag '" + flag + "'");
        l.dropout = true;
      }
      s.layers.push_back(l);
    } else if (key == "skip") {
      SkipSpec sk;
      ls >> sk.from >> sk.to;
      if (!ls) bad("malformed skip line '" + line + "'");
      s.skips.push_back(sk);
    } else if (key == "end") {
      ended = true;
      break;
    } else {
      bad("unknown key '" + key + "'");
    }
  }
  if (!ended) bad("missing 'end'");
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kCorrupt, std::string("architecture descriptor invalid: ") + e.what());
  }
  return s;
}

NetworkSpec build_dbn(double dropout_rate) { return build_prior_net("dbn", dropout_rate); }
NetworkSpec build_gdrn(double dropout_rate) { return build_prior_net("gdrn", dropout_rate); }

NetworkSpec build_tdrn(int in_channels) {
  require(in_channels >= 3 && in_channels <= 5, "TDRN input channels must be 3, 4 or 5");
  NetworkSpec s;
  s.name = in_channels == 5 ? "tdrn" : (in_channels == 4 ? "bn_b" : "bn");
  s.layers = {conv3(in_channels, 16), res2(16, 64), down(), res2(64, 64), down()};
  for (int i = 0; i < 4; ++i) s.layers.push_back(res2(64, 64));
  s.layers.push_back(up());
  s.layers.push_back(res2(64, 64));  // 10
  s.layers.push_back(up());
  s.layers.push_back(res2(64, 3));  // 12
  s.skips = {{3, 10}, {1, 12}};
  s.validate();
  return s;
}

NetworkSpec build_confidence_block() {
  NetworkSpec s;
  s.name = "confidence_block";
  s.layers = {res2(6, 16), res2(16, 16), res2(16, 1), {LayerKind::kSigmoid}};
  s.validate();
  return s;
}

NetworkSpec build_feature_extractor() {
  NetworkSpec s;
  s.name = "features";
  s.layers = {conv3(3, 16), down(), conv3(16, 32), down(), conv3(32, 64), down(), conv3(64, 64), down()};
  s.validate();
  return s;
}

std::vector<ParamShape> res2block_param_shapes(const Res2BlockSpec& spec, const std::string& prefix) {
  spec.validate();
  std::vector<ParamShape> out;
  const int m = spec.in, n = spec.out;
  push_conv(out, prefix + ".conv_in", n, m, 1);
  const int s = spec.effective_scale();
  if (s == 1) {
    push_conv(out, prefix + ".conv_mid", n, n, 3);
  } else {
    const int w = spec.group_width();
    for (int i = 2; i <= s; ++i) push_conv(out, prefix + ".group" + std::to_string(i), w, w, 3);
  }
  push_conv(out, prefix + ".conv_out", n, n, 1);
  if (m != n) push_conv(out, prefix + ".proj", n, m, 1);
  return out;
}

std::vector<ParamShape> parameter_shapes(const NetworkSpec& spec) {
  std::vector<ParamShape> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const std::string prefix = layer_prefix(i);
    if (l.kind == LayerKind::kConv3x3) push_conv(out, prefix + ".conv", l.out, l.in, 3);
    if (l.kind == LayerKind::kRes2Block) {
      auto block = res2block_param_shapes({l.in, l.out, l.scale}, prefix);
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0;
  for (const auto& p : parameter_shapes(spec)) n += p.count();
  return n;
}

}  // namespace tdrn::arch
