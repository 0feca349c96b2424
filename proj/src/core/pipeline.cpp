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

#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include "eval.hpp"
#include "log.hpp"

namespace tdrn::pipeline {

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) fail(ErrorCode::kIo, "cannot write " + p.string());
}

void require_key(const std::string& value, const std::string& key, const std::string& why) {
  if (value.empty()) fail(ErrorCode::kConfig, "config key '" + key + "' is required " + why);
}

void require_file(const std::string& path, const std::string& key) {
  if (!fs::exists(path)) fail(ErrorCode::kConfig, "config key '" + key + "' points to a missing file: " + path);
}

losses::FeatureExtractor<float> features_for(const config::RunConfig& cfg) {
  if (cfg.eval.feature_checkpoint.empty()) return losses::FeatureExtractor<float>::desk();
  require_file(cfg.eval.feature_checkpoint, "eval.feature_checkpoint");
  return losses::FeatureExtractor<float>::from_checkpoint(cfg.eval.feature_checkpoint);
}

arch::Network<float> load_prior_net(const std::string& path, const std::string& which, double dropout_rate) {
  const auto spec = which == "dbn" ? arch::build_dbn() : arch::build_gdrn();
  auto net = load_checkpoint(path, spec).modules.front().network();
  net.set_dropout_rate(dropout_rate);
  return net;
}

turbsim::Manifest load_role(const std::string& dataset_dir, train::Role role) {
  require_key(dataset_dir, "data.dataset_dir", "to locate the training manifests");
  return turbsim::read_manifest(role_manifest(dataset_dir, role));
}

std::vector<fs::path> list_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

fs::path default_run_dir(const std::string& label, const config::RunConfig& cfg) {
  const char* root = std::getenv(kRunRootEnv);
  return fs::path(root && *root ? root : "runs") / (label + "-" + cfg.checksum().substr(0, 8));
}

void echo_config(const config::RunConfig& cfg, const fs::path& run_dir) {
  write_file(run_dir / kConfigEcho, cfg.to_json());
}

std::string file_identity(const fs::path& path) {
  return path.filename().string() + "@" + config::fnv1a_hex(read_file(path));
}

// ---------------------------------------------------------------------------

fs::path role_manifest(const fs::path& dataset_dir, train::Role role) {
  switch (role) {
    case train::Role::kDeturbulence: return dataset_dir / "manifest.jsonl";
    case train::Role::kDeblur: return dataset_dir / "deblur.jsonl";
    case train::Role::kDewarp: return dataset_dir / "dewarp.jsonl";
  }
  return {};
}

DegradeSummary cmd_degrade(const config::RunConfig& cfg, const fs::path& clean_dir, const fs::path& out_dir) {
  cfg.validate();
  if (!fs::is_directory(clean_dir)) fail(ErrorCode::kNotFound, "clean image directory not found: " + clean_dir.string());
  const auto grid = cfg.degrade.grid();

  // Same master seed for every role, so record r of each manifest shares
  // its kernel and deformation draws.
  auto variant = [&](const char* dir, const char* manifest, auto&& edit) {
    std::vector<turbsim::DegradationConfig> g = grid;
    for (auto& c : g) edit(c);
    turbsim::DatasetOptions opts;
    opts.image_size = cfg.data.image_size;
    opts.master_seed = cfg.degrade.master_seed;
    opts.distorted_dir = dir;
    opts.manifest_name = manifest;
    return turbsim::generate_dataset(clean_dir, g, out_dir, opts);
  };
  variant("deblur", "deblur.jsonl", [](turbsim::DegradationConfig& c) {
    c.iterations = 0;
    c.noise_std = 0.0;
  });
  variant("dewarp", "dewarp.jsonl", [](turbsim::DegradationConfig& c) {
    c.blur = turbsim::BlurSpec::identity();
    c.noise_std = 0.0;
  });
  const auto main = variant("distorted", "manifest.jsonl", [](turbsim::DegradationConfig&) {});
  echo_config(cfg, out_dir);

  DegradeSummary s;
  s.manifest = out_dir / "manifest.jsonl";
  s.records = main.records.size();
  s.images = s.records / grid.size();
  s.manifest_checksum = config::fnv1a_hex(read_file(s.manifest));
  log::info("degraded " + std::to_string(s.images) + " image(s) into " + std::to_string(s.records) + " record(s)");
  return s;
}

fs::path latest_checkpoint(const fs::path& run_dir, const std::string& which) {
  fs::path best;
  if (!fs::is_directory(run_dir)) return best;
  const std::string prefix = which + "_iter";
  for (const auto& f : list_files(run_dir)) {
    const std::string name = f.filename().string();
    if (name.rfind(prefix, 0) == 0 && f.extension() == ".ckpt") best = f;  // sorted, zero-padded
  }
  return best;
}

fs::path cmd_train(const config::RunConfig& cfg, const TrainRequest& req) {
  cfg.validate();
  const auto tc = cfg.resolved_train(req.which);
  std::optional<arch::Network<float>> dbn, gdrn;
  // Prerequisites are checked before any compute.
  if (req.which == "tdrn") {
    require_key(cfg.train.dbn_checkpoint, "train.dbn_checkpoint", "to train tdrn");
    require_key(cfg.train.gdrn_checkpoint, "train.gdrn_checkpoint", "to train tdrn");
    require_file(cfg.train.dbn_checkpoint, "train.dbn_checkpoint");
    require_file(cfg.train.gdrn_checkpoint, "train.gdrn_checkpoint");
  }
  require_key(cfg.data.dataset_dir, "data.dataset_dir", "to locate the training manifests");

  train::RunIO io;
  io.run_dir = req.run_dir;
  if (req.resume) {
    io.resume_from = req.resume_from.empty() ? latest_checkpoint(req.run_dir, req.which) : req.resume_from;
    if (io.resume_from.empty()) fail(ErrorCode::kNotFound, "--resume: no checkpoint found in " + req.run_dir.string());
  }
  echo_config(cfg, req.run_dir);

  if (req.which == "dbn" || req.which == "gdrn") {
    const auto role = req.which == "dbn" ? train::Role::kDeblur : train::Role::kDewarp;
    const auto ds = train::PairDataset::from_manifest(load_role(cfg.data.dataset_dir, role), role);
    train::train_restorer(req.which, ds, tc, cfg.priors.dropout_rate, io);
  } else {
    dbn = load_prior_net(cfg.train.dbn_checkpoint, "dbn", cfg.priors.dropout_rate);
    gdrn = load_prior_net(cfg.train.gdrn_checkpoint, "gdrn", cfg.priors.dropout_rate);
    const auto features = features_for(cfg);
    const auto ds = train::PairDataset::from_manifest(load_role(cfg.data.dataset_dir, train::Role::kDeturbulence),
                                                      train::Role::kDeturbulence);
    train::train_tdrn(ds, &*dbn, &*gdrn, tc, io, train::kAblationVariants[3], &features);
  }
  return req.run_dir / (req.which + ".ckpt");
}

namespace {
train::Restorer load_restorer(const config::RunConfig& cfg) {
  require_key(cfg.train.tdrn_checkpoint, "train.tdrn_checkpoint", "to restore images");
  require_file(cfg.train.tdrn_checkpoint, "train.tdrn_checkpoint");
  if (!cfg.train.dbn_checkpoint.empty()) require_file(cfg.train.dbn_checkpoint, "train.dbn_checkpoint");
  if (!cfg.train.gdrn_checkpoint.empty()) require_file(cfg.train.gdrn_checkpoint, "train.gdrn_checkpoint");
  auto r = train::Restorer::load(cfg.train.dbn_checkpoint, cfg.train.gdrn_checkpoint, cfg.train.tdrn_checkpoint);
  if (r.dbn) r.dbn->set_dropout_rate(cfg.priors.dropout_rate);
  if (r.gdrn) r.gdrn->set_dropout_rate(cfg.priors.dropout_rate);
  return r;
}

std::string restorer_identity(const config::RunConfig& cfg) {
  std::string id;
  for (const auto* p : {&cfg.train.dbn_checkpoint, &cfg.train.gdrn_checkpoint, &cfg.train.tdrn_checkpoint})
    if (!p->empty()) id += (id.empty() ? "" : ",") + file_identity(*p);
  return id;
}
}  // namespace

std::size_t cmd_restore(const config::RunConfig& cfg, const fs::path& input, const fs::path& out_dir, int samples,
                        std::uint64_t seed) {
  cfg.validate();
  require(samples >= 1, "number of MC samples S must be >= 1");
  if (!fs::exists(input)) fail(ErrorCode::kNotFound, "restore input not found: " + input.string());
  const auto restorer = load_restorer(cfg);
  const std::vector<fs::path> files = fs::is_directory(input) ? list_files(input) : std::vector<fs::path>{input};
  fs::create_directories(out_dir);
  std::size_t written = 0;
  for (const auto& f : files) {
    Image img;
    try {
      img = read_png(f);
    } catch (const Error& e) {
      log::warn("skipping " + f.string() + ": " + e.what());
      continue;
    }
    write_png(restorer(img, samples, seed), out_dir / f.filename());
    ++written;
  }
  log::info("restored " + std::to_string(written) + " image(s) into " + out_dir.string());
  return written;
}

fs::path cmd_evaluate(const config::RunConfig& cfg, const EvaluateRequest& req) {
  cfg.validate();
  fs::path manifest_path = req.manifest;
  if (manifest_path.empty()) {
    const std::string dir = cfg.data.test_dir.empty() ? cfg.data.dataset_dir : cfg.data.test_dir;
    require_key(dir, "data.test_dir", "when no manifest is given");
    manifest_path = role_manifest(dir, train::Role::kDeturbulence);
  }
  const auto manifest = turbsim::read_manifest(manifest_path);
  const auto features = features_for(cfg);

  std::string source;
  eval::RestoreFn fn;
  std::optional<train::Restorer> restorer;
  if (!req.passthrough.empty()) {
    if (req.passthrough != "clean" && req.passthrough != "distorted")
      fail(ErrorCode::kInvalidArgument, "--passthrough expects clean or distorted, got '" + req.passthrough + "'");
    source = "passthrough:" + req.passthrough;
    if (req.passthrough == "clean")
      fn = [&](const Image&, std::size_t i) { return read_png(manifest.clean(i)); };
    else
      fn = [](const Image& d, std::size_t) { return d; };
  } else if (!req.restored_dir.empty()) {
    if (!fs::is_directory(req.restored_dir))
      fail(ErrorCode::kNotFound, "restored directory not found: " + req.restored_dir.string());
    source = "restored:" + req.restored_dir.filename().string();
    fn = [&](const Image&, std::size_t i) {
      return read_png(req.restored_dir / fs::path(manifest.records[i].distorted_path).filename());
    };
  } else {
    restorer.emplace(load_restorer(cfg));
    source = restorer_identity(cfg);
    const int samples = cfg.priors.samples;
    const std::uint64_t seed = cfg.eval.seed;
    fn = [&, samples, seed](const Image& d, std::size_t i) { return (*restorer)(d, samples, derive_seed(seed, i)); };
  }

  eval::EvalOptions opts;
  opts.metrics = cfg.eval.metrics;
  opts.ks = cfg.eval.ks;
  auto report = eval::evaluate_dataset(manifest, fn, features, opts);
  report.dataset = file_identity(manifest_path);
  report.checkpoints = source;
  report.config_checksum = cfg.checksum();
  echo_config(cfg, req.out_dir);
  const fs::path out = req.out_dir / "report.txt";
  eval::write_report(report, out);
  return out;
}

fs::path cmd_ablate(const config::RunConfig& cfg, const fs::path& run_dir) {
  cfg.validate();
  require_key(cfg.data.dataset_dir, "data.dataset_dir", "for the ablation training set");
  require_key(cfg.data.test_dir, "data.test_dir", "for the ablation test set");
  echo_config(cfg, run_dir);
  const auto features = features_for(cfg);

  auto prior = [&](const std::string& which, const std::string& ckpt, train::Role role) {
    if (!ckpt.empty()) {
      require_file(ckpt, "train." + which + "_checkpoint");
      return load_prior_net(ckpt, which, cfg.priors.dropout_rate);
    }
    log::info("ablation: training " + which);
    const auto ds = train::PairDataset::from_manifest(load_role(cfg.data.dataset_dir, role), role);
    train::RunIO io;
    io.run_dir = run_dir / which;
    auto res = train::train_restorer(which, ds, cfg.resolved_train(which), cfg.priors.dropout_rate, io);
    return res.checkpoint.modules.front().network();
  };
  const auto dbn = prior("dbn", cfg.train.dbn_checkpoint, train::Role::kDeblur);
  const auto gdrn = prior("gdrn", cfg.train.gdrn_checkpoint, train::Role::kDewarp);

  const auto train_ds = train::PairDataset::from_manifest(load_role(cfg.data.dataset_dir, train::Role::kDeturbulence),
                                                          train::Role::kDeturbulence);
  const auto test_ds = train::PairDataset::from_manifest(
      turbsim::read_manifest(role_manifest(cfg.data.test_dir, train::Role::kDeturbulence)), train::Role::kDeturbulence);

  train::AblationConfig ac;
  ac.tdrn = cfg.resolved_train("tdrn");
  ac.eval_samples = cfg.priors.samples;
  ac.eval_seed = cfg.eval.seed;
  const auto report = train::run_ablation(train_ds, test_ds, dbn, gdrn, ac, features, run_dir);
  const fs::path out = run_dir / "ablation.txt";
  write_file(out, "# config_checksum: " + cfg.checksum() + "\n" + report.table());
  write_file(run_dir / "ablation.json", report.json());
  return out;
}

std::size_t cmd_synth(const fs::path& out_dir, int count, int size, std::uint64_t seed) {
  require(count >= 1, "synth: count must be >= 1");
  require(size >= Image::kMinSide, "synth: size must be >= 8");
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "face_%03d.png", i);
    write_png(synth_face(size, derive_seed(seed, static_cast<std::uint64_t>(i))), out_dir / name);
  }
  return static_cast<std::size_t>(count);
}

}  // namespace tdrn::pipeline
