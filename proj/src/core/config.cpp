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

#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tdrn::config {

using Json = nlohmann::ordered_json;

namespace {

/// Reads an object field by field and rejects whatever was not consumed.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::kConfig, where() + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) fail(ErrorCode::kConfig, "unknown config key '" + join(k) + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorCode::kConfig, "config key '" + join(key) + "' has the wrong type");
    }
  }

  /// Nested object; absent means all defaults.
  template <typename F>
  void sub(const char* key, F&& fn) {
    seen_.insert(key);
    static const Json empty = Json::object();
    Section s(j_.contains(key) ? j_.at(key) : empty, join(key));
    fn(s);
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string join(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json blur_json(const turbsim::BlurSpec& b) {
  Json j;
  j["kind"] = turbsim::to_string(b.kind);
  if (b.kind != turbsim::BlurKind::kIdentity) j["size"] = b.size;
  if (b.kind == turbsim::BlurKind::kGaussian) {
    j["sigma_x"] = b.sigma_x;
    j["sigma_y"] = b.sigma_y;
    j["theta"] = b.theta;
  }
  return j;
}

turbsim::BlurSpec parse_blur(Section& s) {
  std::string kind = "identity";
  s.get("kind", kind);
  turbsim::BlurSpec b;
  try {
    b.kind = turbsim::blur_kind_from_string(kind);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, s.join("kind") + ": " + e.what());
  }
  if (b.kind != turbsim::BlurKind::kIdentity) s.get("size", b.size);
  if (b.kind == turbsim::BlurKind::kGaussian) {
    s.get("sigma_x", b.sigma_x);
    s.get("sigma_y", b.sigma_y);
    s.get("theta", b.theta);
  }
  return b;
}

Json train_json(const train::TrainConfig& c) {
  Json j;
  j["learning_rate"] = c.adam.learning_rate;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["epsilon"] = c.adam.epsilon;
  j["batch_size"] = c.batch_size;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["checkpoint_interval"] = c.checkpoint_interval;
  return j;
}

void parse_train(Section& s, train::TrainConfig& c) {
  s.get("learning_rate", c.adam.learning_rate);
  s.get("beta1", c.adam.beta1);
  s.get("beta2", c.adam.beta2);
  s.get("epsilon", c.adam.epsilon);
  s.get("batch_size", c.batch_size);
  s.get("iterations", c.iterations);
  s.get("seed", c.seed);
  s.get("checkpoint_interval", c.checkpoint_interval);
}

}  // namespace

std::vector<turbsim::DegradationConfig> DegradeConfig::grid() const {
  std::vector<turbsim::DegradationConfig> out;
  for (const auto& b : blurs)
    for (int m : iterations) {
      turbsim::DegradationConfig c;
      c.sigma = sigma;
      c.eta = eta;
      c.patch_count = patch_count;
      c.iterations = m;
      c.noise_std = noise_std;
      c.blur = b;
      out.push_back(c);
    }
  return out;
}

train::TrainConfig& TrainSection::get(const std::string& which) {
  if (which == "dbn") return dbn;
  if (which == "gdrn") return gdrn;
  if (which == "tdrn") return tdrn;
  fail(ErrorCode::kInvalidArgument, "unknown network '" + which + "' (expected dbn, gdrn or tdrn)");
}

const train::TrainConfig& TrainSection::get(const std::string& which) const {
  return const_cast<TrainSection*>(this)->get(which);
}

RunConfig RunConfig::from_json(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  {
    Section s(root, "");
    s.sub("data", [&](Section& d) {
      d.get("clean_dir", c.data.clean_dir);
      d.get("dataset_dir", c.data.dataset_dir);
      d.get("test_dir", c.data.test_dir);
      d.get("image_size", c.data.image_size);
    });
    s.sub("degrade", [&](Section& d) {
      d.get("master_seed", c.degrade.master_seed);
      d.get("sigma", c.degrade.sigma);
      d.get("eta", c.degrade.eta);
      d.get("patch_count", c.degrade.patch_count);
      d.get("noise_std", c.degrade.noise_std);
      d.get("M", c.degrade.iterations);
      if (d.has("blurs")) {
        const Json& arr = d.raw("blurs");
        if (!arr.is_array()) fail(ErrorCode::kConfig, "degrade.blurs must be an array");
        c.degrade.blurs.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
          Section b(arr[i], "degrade.blurs[" + std::to_string(i) + "]");
          c.degrade.blurs.push_back(parse_blur(b));
        }
      }
    });
    s.sub("train", [&](Section& t) {
      for (const char* which : {"dbn", "gdrn", "tdrn"}) t.sub(which, [&](Section& n) { parse_train(n, c.train.get(which)); });
      t.get("dbn_checkpoint", c.train.dbn_checkpoint);
      t.get("gdrn_checkpoint", c.train.gdrn_checkpoint);
      t.get("tdrn_checkpoint", c.train.tdrn_checkpoint);
    });
    s.sub("priors", [&](Section& p) {
      p.get("S", c.priors.samples);
      p.get("dropout_rate", c.priors.dropout_rate);
    });
    s.sub("loss", [&](Section& l) {
      l.get("lambda_c", c.loss.lambda_c);
      l.get("lambda_g", c.loss.lambda_g);
      l.get("lambda_p", c.loss.lambda_p);
    });
    s.sub("eval", [&](Section& e) {
      e.get("metrics", c.eval.metrics);
      e.get("ks", c.eval.ks);
      e.get("seed", c.eval.seed);
      e.get("feature_checkpoint", c.eval.feature_checkpoint);
    });
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::string RunConfig::to_json() const {
  Json j;
  j["data"] = {{"clean_dir", data.clean_dir},
               {"dataset_dir", data.dataset_dir},
               {"test_dir", data.test_dir},
               {"image_size", data.image_size}};
  Json blurs = Json::array();
  for (const auto& b : degrade.blurs) blurs.push_back(blur_json(b));
  j["degrade"] = {{"master_seed", degrade.master_seed}, {"sigma", degrade.sigma},
                  {"eta", degrade.eta},                 {"patch_count", degrade.patch_count},
                  {"noise_std", degrade.noise_std},     {"M", degrade.iterations},
                  {"blurs", blurs}};
  j["train"] = {{"dbn", train_json(train.dbn)},
                {"gdrn", train_json(train.gdrn)},
                {"tdrn", train_json(train.tdrn)},
                {"dbn_checkpoint", train.dbn_checkpoint},
                {"gdrn_checkpoint", train.gdrn_checkpoint},
                {"tdrn_checkpoint", train.tdrn_checkpoint}};
  j["priors"] = {{"S", priors.samples}, {"dropout_rate", priors.dropout_rate}};
  j["loss"] = {{"lambda_c", loss.lambda_c}, {"lambda_g", loss.lambda_g}, {"lambda_p", loss.lambda_p}};
  j["eval"] = {{"metrics", eval.metrics},
               {"ks", eval.ks},
               {"seed", eval.seed},
               {"feature_checkpoint", eval.feature_checkpoint}};
  return j.dump(2) + "\n";
}

void RunConfig::set(const std::string& dotted_key, const std::string& json_value) {
  Json root = Json::parse(to_json());
  Json value;
  try {
    value = Json::parse(json_value);
  } catch (const nlohmann::json::exception&) {
    value = json_value;  // bare strings need no quoting
  }
  std::string ptr = "/";
  for (char ch : dotted_key) ptr += ch == '.' ? '/' : ch;
  const Json::json_pointer p(ptr);
  if (!root.contains(p)) fail(ErrorCode::kConfig, "unknown config key '" + dotted_key + "'");
  root[p] = value;
  *this = from_json(root.dump());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::checksum() const { return fnv1a_hex(to_json()); }

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::kConfig, msg);
  };
  check(data.image_size >= Image::kMinSide, "data.image_size must be >= 8");
  check(degrade.sigma > 0, "degrade.sigma must be > 0");
  check(degrade.eta >= 0, "degrade.eta must be >= 0");
  check(degrade.patch_count >= 0, "degrade.patch_count must be >= 0");
  check(degrade.noise_std >= 0, "degrade.noise_std must be >= 0");
  check(!degrade.iterations.empty(), "degrade.M must not be empty");
  for (int m : degrade.iterations) check(m >= 0, "degrade.M entries must be >= 0");
  check(!degrade.blurs.empty(), "degrade.blurs must not be empty");
  for (const auto& b : degrade.blurs)
    check(b.kind == turbsim::BlurKind::kIdentity || (b.size >= 3 && b.size % 2 == 1),
          "degrade.blurs: kernel size must be odd and >= 3");
  for (const char* which : {"dbn", "gdrn", "tdrn"}) {
    try {
      resolved_train(which).validate();
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string("train.") + which + ": " + e.what());
    }
  }
  check(priors.samples >= 1, "priors.S must be >= 1");
  check(priors.dropout_rate >= 0 && priors.dropout_rate < 1, "priors.dropout_rate must lie in [0,1)");
  check(loss.lambda_c >= 0 && loss.lambda_g >= 0 && loss.lambda_p >= 0, "loss weights must be >= 0");
  for (const auto& m : eval.metrics)
    check(m == "psnr" || m == "ssim" || m == "dvgg", "eval.metrics: unknown metric '" + m + "'");
  for (int k : eval.ks) check(k >= 1, "eval.ks entries must be >= 1");
}

train::TrainConfig RunConfig::resolved_train(const std::string& which) const {
  train::TrainConfig c = train.get(which);
  c.samples = priors.samples;
  c.loss = which == "tdrn" ? loss : losses::LossWeights{0.0, 0.0, 0.0};
  return c;
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.degrade.master_seed = seed;
  cfg.train.dbn.seed = seed;
  cfg.train.gdrn.seed = seed;
  cfg.train.tdrn.seed = seed;
  cfg.eval.seed = seed;
}

}  // namespace tdrn::config
