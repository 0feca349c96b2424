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

#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tdrn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'D', 'R', 'N', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename P>
  void pod(P v) {
    const auto* b = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), b, b + sizeof(P));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void tensor(const nn::Tensor<float>& t) {
    for (int d : {t.n, t.c, t.h, t.w}) pod(static_cast<std::int32_t>(d));
    const auto* b = reinterpret_cast<const std::uint8_t*>(t.data.data());
    buf_.insert(buf_.end(), b, b + t.size() * sizeof(float));
  }
  void named(const NamedTensors& ts) {
    pod(static_cast<std::uint32_t>(ts.size()));
    for (const auto& [name, t] : ts) {
      str(name);
      tensor(t);
    }
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  template <typename P>
  P pod() {
    need(sizeof(P));
    P v;
    std::memcpy(&v, p_ + pos_, sizeof(P));
    pos_ += sizeof(P);
    return v;
  }
  std::string str() {
    const auto len = pod<std::uint32_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  nn::Tensor<float> tensor() {
    std::int32_t d[4];
    for (auto& v : d) {
      v = pod<std::int32_t>();
      if (v < 0 || v > (1 << 24)) fail(ErrorCode::kCorrupt, "checkpoint: implausible tensor dimension");
    }
    nn::Tensor<float> t(d[0], d[1], d[2], d[3]);
    need(t.size() * sizeof(float));
    std::memcpy(t.data.data(), p_ + pos_, t.size() * sizeof(float));
    pos_ += t.size() * sizeof(float);
    return t;
  }
  NamedTensors named() {
    const auto count = pod<std::uint32_t>();
    NamedTensors out;
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = str();
      out.emplace_back(std::move(name), tensor());
    }
    return out;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > n_) fail(ErrorCode::kCorrupt, "checkpoint truncated");
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

ModuleState ModuleState::from(const std::string& name, const arch::Network<float>& net) {
  ModuleState m{name, net.spec(), {}};
  const auto& ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i) m.params.emplace_back(ps.names()[i], ps.vars()[i].value());
  return m;
}

arch::Network<float> ModuleState::network() const {
  arch::ParameterSet<float> ps;
  for (const auto& [n, t] : params) ps.add(n, t);
  return arch::Network<float>(spec, std::move(ps));
}

const ModuleState& Checkpoint::module(const std::string& name) const {
  for (const auto& m : modules)
    if (m.name == name) return m;
  fail(ErrorCode::kArchMismatch, "checkpoint has no module '" + name + "'");
}

bool Checkpoint::has_module(const std::string& name) const {
  for (const auto& m : modules)
    if (m.name == name) return true;
  return false;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  for (char c : kMagic) w.pod(c);
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint32_t>(ckpt.modules.size()));
  for (const auto& m : ckpt.modules) {
    w.str(m.name);
    w.str(m.spec.describe());
    w.named(m.params);
  }
  const auto& o = ckpt.optimizer;
  w.str(o.kind);
  w.pod(o.learning_rate);
  w.pod(o.beta1);
  w.pod(o.beta2);
  w.pod(o.epsilon);
  w.pod(o.step);
  require(o.m.size() == o.v.size(), "optimizer moment lists differ in length");
  w.pod(static_cast<std::uint32_t>(o.m.size()));
  for (std::size_t i = 0; i < o.m.size(); ++i) {
    require(o.m[i].first == o.v[i].first, "optimizer moment names differ");
    w.str(o.m[i].first);
    w.tensor(o.m[i].second);
    w.tensor(o.v[i].second);
  }
  w.pod(ckpt.iteration);
  for (auto s : ckpt.rng) w.pod(s);
  auto& bytes = w.bytes();
  const std::uint64_t sum = fnv1a(bytes.data(), bytes.size());
  w.pod(sum);
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::kCorrupt, "not a tdrn checkpoint");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  Reader r(bytes.data(), bytes.size() - 8);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    fail(ErrorCode::kCorrupt, "checkpoint version " + std::to_string(version) + " not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored) fail(ErrorCode::kCorrupt, "checkpoint checksum mismatch");

  Checkpoint ckpt;
  const auto modules = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < modules; ++i) {
    ModuleState m;
    m.name = r.str();
    m.spec = arch::NetworkSpec::parse(r.str());
    m.params = r.named();
    ckpt.modules.push_back(std::move(m));
  }
  auto& o = ckpt.optimizer;
  o.kind = r.str();
  o.learning_rate = r.pod<double>();
  o.beta1 = r.pod<double>();
  o.beta2 = r.pod<double>();
  o.epsilon = r.pod<double>();
  o.step = r.pod<std::uint64_t>();
  const auto slots = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < slots; ++i) {
    std::string name = r.str();
    auto m = r.tensor();
    auto v = r.tensor();
    o.m.emplace_back(name, std::move(m));
    o.v.emplace_back(std::move(name), std::move(v));
  }
  ckpt.iteration = r.pod<std::uint64_t>();
  for (auto& s : ckpt.rng) s = r.pod<std::uint64_t>();
  if (r.pos() != bytes.size() - 8) fail(ErrorCode::kCorrupt, "checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

bool same_architecture(const arch::NetworkSpec& a, const arch::NetworkSpec& b) {
  arch::NetworkSpec x = a, y = b;
  x.dropout_rate = y.dropout_rate = 0.0;
  return x == y;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const arch::NetworkSpec& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.modules.empty()) fail(ErrorCode::kArchMismatch, path.string() + ": checkpoint has no modules");
  const auto& got = ckpt.modules.front().spec;
  if (!same_architecture(got, expected))
    fail(ErrorCode::kArchMismatch, path.string() + ": checkpoint holds architecture '" + got.name +
                                       "', expected '" + expected.name + "'");
  return ckpt;
}

}  // namespace tdrn
