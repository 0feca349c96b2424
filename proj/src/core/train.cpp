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

#include "train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "convert.hpp"
#include "eval.hpp"
#include "json.hpp"
#include "log.hpp"

namespace tdrn::train {

std::string to_string(Role role) {
  switch (role) {
    case Role::kDeblur: return "deblur";
    case Role::kDewarp: return "dewarp";
    case Role::kDeturbulence: return "deturbulence";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  if (s == "deblur") return Role::kDeblur;
  if (s == "dewarp") return Role::kDewarp;
  if (s == "deturbulence") return Role::kDeturbulence;
  fail(ErrorCode::kInvalidArgument, "unknown dataset role '" + s + "'");
}

// ---------------------------------------------------------------------------
// PairDataset

PairDataset PairDataset::from_manifest(const turbsim::Manifest& manifest, Role role) {
  PairDataset ds;
  ds.role_ = role;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    ds.entries_.push_back({manifest.distorted(i), manifest.clean(i), std::nullopt, std::nullopt});
  return ds;
}

PairDataset PairDataset::from_images(std::vector<Image> inputs, std::vector<Image> targets, Role role) {
  require(inputs.size() == targets.size(), "pair dataset: input and target counts differ");
  PairDataset ds;
  ds.role_ = role;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require(inputs[i].same_shape(targets[i]) && inputs[i].same_shape(inputs.front()),
            "pair dataset: every image must have the same size");
    ds.entries_.push_back({{}, {}, std::move(inputs[i]), std::move(targets[i])});
  }
  if (!ds.entries_.empty()) {
    ds.height_ = ds.entries_.front().input->height();
    ds.width_ = ds.entries_.front().input->width();
  }
  return ds;
}

const Image& PairDataset::load(const std::filesystem::path& path, std::optional<Image>& slot) const {
  if (!slot) {
    Image img = read_png(path);
    if (height_ == 0) {
      height_ = img.height();
      width_ = img.width();
    }
    if (img.height() != height_ || img.width() != width_)
      fail(ErrorCode::kInvalidArgument, "pair dataset: " + path.string() + " is " + std::to_string(img.height()) +
                                            "x" + std::to_string(img.width()) + ", expected " +
                                            std::to_string(height_) + "x" + std::to_string(width_));
    slot = std::move(img);
  }
  return *slot;
}

const Image& PairDataset::input(std::size_t i) const {
  require(i < entries_.size(), "pair index out of range");
  return load(entries_[i].input_path, entries_[i].input);
}

const Image& PairDataset::target(std::size_t i) const {
  require(i < entries_.size(), "pair index out of range");
  return load(entries_[i].target_path, entries_[i].target);
}

// ---------------------------------------------------------------------------
// Config and loss log

void TrainConfig::validate() const {
  adam.validate();
  require(batch_size >= 1, "batch_size must be >= 1");
  require(iterations >= 1, "iterations must be >= 1");
  require(samples >= 1, "number of MC samples S must be >= 1");
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  loss.validate();
}

TrainConfig default_config(const std::string& which) {
  TrainConfig cfg;
  if (which == "dbn" || which == "gdrn") {
    cfg.iterations = kDefaultRestorerIterations;
    cfg.loss = {0.0, 0.0, 0.0};
  } else if (which == "tdrn") {
    cfg.iterations = kDefaultTdrnIterations;
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown network '" + which + "' (expected dbn, gdrn or tdrn)");
  }
  return cfg;
}

std::string loss_line(const LossRecord& r) {
  nlohmann::ordered_json j;
  j["iter"] = r.iter;
  j["L1"] = r.l1;
  j["Lg"] = r.lg;
  j["Lp"] = r.lp;
  j["Lfinal"] = r.lfinal;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

LossRecord parse_loss_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    return {j.at("iter").get<std::uint64_t>(), j.at("L1").get<double>(),     j.at("Lg").get<double>(),
            j.at("Lp").get<double>(),          j.at("Lfinal").get<double>(), j.at("wall_ms").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("bad loss log line: ") + e.what());
  }
}

std::vector<LossRecord> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read loss log " + path.string());
  std::vector<LossRecord> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(parse_loss_line(line));
  return out;
}

std::string checkpoint_filename(const std::string& name, std::uint64_t iteration) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_iter%08llu.ckpt", static_cast<unsigned long long>(iteration));
  return name + buf;
}

// ---------------------------------------------------------------------------
// Shared loop

namespace {

struct Trainable {
  std::string name;
  arch::Network<float>* net;
};

using StepFn = std::function<losses::TotalLoss<float>(const std::vector<std::size_t>& batch, Rng& rng)>;

struct Loop {
  std::string name;  // checkpoint file prefix
  std::vector<Trainable> modules;
  StepFn step;
  std::function<void()> on_checkpoint;  // invariant checks before each save
};

void copy_params(const ModuleState& st, arch::Network<float>& net) {
  if (!same_architecture(st.spec, net.spec()))
    fail(ErrorCode::kArchMismatch, "checkpoint module '" + st.name + "' holds architecture '" + st.spec.name +
                                       "', expected '" + net.spec().name + "'");
  auto& ps = net.params();
  if (st.params.size() != ps.size()) fail(ErrorCode::kArchMismatch, "parameter count mismatch in '" + st.name + "'");
  for (const auto& [name, t] : st.params) {
    auto& v = ps.get(name);
    if (!v.value().same_shape(t)) fail(ErrorCode::kArchMismatch, "parameter " + name + " has the wrong shape");
    v.mutable_value() = t;
  }
}

Checkpoint snapshot(const Loop& loop, const optim::Adam& adam, std::uint64_t iter, const Rng& rng) {
  Checkpoint ck;
  for (const auto& m : loop.modules) ck.modules.push_back(ModuleState::from(m.name, *m.net));
  ck.optimizer = adam.state();
  ck.iteration = iter;
  ck.rng = rng.state();
  return ck;
}

/// Keeps the first `keep` records of an existing log, dropping the rest.
void truncate_log(const std::filesystem::path& path, std::uint64_t keep) {
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    for (std::string line; lines.size() < keep && std::getline(in, line);)
      if (!line.empty() && parse_loss_line(line).iter <= keep) lines.push_back(line);
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

constexpr std::uint64_t kLoopStream = 0x7A11;

TrainResult run_loop(const Loop& loop, std::size_t dataset_size, const TrainConfig& cfg, const RunIO& io) {
  cfg.validate();
  require(dataset_size > 0, "training dataset is empty");
  optim::Adam adam(cfg.adam);
  for (const auto& m : loop.modules) adam.add_all(m.name, m.net->params());
  Rng rng(derive_seed(cfg.seed, kLoopStream));

  std::uint64_t start = 0;
  if (!io.resume_from.empty()) {
    const Checkpoint ck = load_checkpoint(io.resume_from);
    for (const auto& m : loop.modules) copy_params(ck.module(m.name), *m.net);
    adam.load_state(ck.optimizer);
    rng.set_state(ck.rng);
    start = ck.iteration;
    log::info("resuming '" + loop.name + "' from iteration " + std::to_string(start));
  }

  std::ofstream log_file;
  if (!io.run_dir.empty()) {
    std::filesystem::create_directories(io.run_dir);
    const auto log_path = io.run_dir / kLossLogName;
    if (start > 0 && std::filesystem::exists(log_path))
      truncate_log(log_path, start);
    else
      std::ofstream(log_path, std::ios::trunc);
    log_file.open(log_path, std::ios::app);
    if (!log_file) fail(ErrorCode::kIo, "cannot open loss log " + log_path.string());
  }

  TrainResult result;
  const auto total = static_cast<std::uint64_t>(cfg.iterations);
  if (start >= total) log::warn("checkpoint already at iteration " + std::to_string(start) + ", nothing to train");
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
  for (std::uint64_t iter = start + 1; iter <= total; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto& b : batch) b = rng.uniform_int(static_cast<std::uint32_t>(dataset_size));
    adam.zero_grad();
    const auto loss = loop.step(batch, rng);
    if (!std::isfinite(loss.lfinal))
      fail(ErrorCode::kDiverged, "'" + loop.name + "' diverged at iteration " + std::to_string(iter) +
                                     " (L1=" + std::to_string(loss.l1) + ", Lg=" + std::to_string(loss.lg) +
                                     ", Lp=" + std::to_string(loss.lp) + ")");
    nn::backward(loss.total);
    adam.step();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const LossRecord rec{iter, loss.l1, loss.lg, loss.lp, loss.lfinal, ms};
    result.log.push_back(rec);
    if (log_file.is_open()) log_file << loss_line(rec) << '\n' << std::flush;
    if (io.on_iteration) io.on_iteration(rec);

    const bool periodic = cfg.checkpoint_interval > 0 && iter % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0;
    if (periodic || iter == total) {
      if (loop.on_checkpoint) loop.on_checkpoint();
      if (!io.run_dir.empty()) {
        result.checkpoint_path = io.run_dir / checkpoint_filename(loop.name, iter);
        save_checkpoint(snapshot(loop, adam, iter, rng), result.checkpoint_path);
      }
    }
  }
  result.checkpoint = snapshot(loop, adam, std::max(start, total), rng);
  if (!io.run_dir.empty()) {
    const auto latest = io.run_dir / (loop.name + ".ckpt");
    save_checkpoint(result.checkpoint, latest);
    if (result.checkpoint_path.empty()) result.checkpoint_path = latest;
  }
  return result;
}

nn::Tensor<float> gather(const std::vector<nn::Tensor<float>>& items, const std::vector<std::size_t>& batch) {
  const auto& f = items.front();
  nn::Tensor<float> out(static_cast<int>(batch.size()), f.c, f.h, f.w);
  const std::size_t stride = static_cast<std::size_t>(f.c) * f.plane();
  for (std::size_t b = 0; b < batch.size(); ++b)
    std::copy(items[batch[b]].data.begin(), items[batch[b]].data.end(), out.data.begin() + b * stride);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// DBN / GDRN

TrainResult train_restorer(const std::string& which, const PairDataset& ds, const TrainConfig& cfg,
                           double dropout_rate, const RunIO& io) {
  arch::NetworkSpec spec;
  if (which == "dbn") {
    require(ds.role() == Role::kDeblur, "dbn trains on a deblur dataset, got " + to_string(ds.role()));
    spec = arch::build_dbn(dropout_rate);
  } else if (which == "gdrn") {
    require(ds.role() == Role::kDewarp, "gdrn trains on a dewarp dataset, got " + to_string(ds.role()));
    spec = arch::build_gdrn(dropout_rate);
  } else {
    fail(ErrorCode::kInvalidArgument, "train_restorer expects dbn or gdrn, got '" + which + "'");
  }
  require(!ds.empty(), "training dataset is empty");
  auto net = arch::Network<float>::init(spec, derive_seed(cfg.seed, 1));

  std::vector<nn::Tensor<float>> inputs, targets;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    inputs.push_back(to_tensor<float>(ds.input(i)));
    targets.push_back(to_tensor<float>(ds.target(i)));
  }

  Loop loop;
  loop.name = which;
  loop.modules = {{which, &net}};
  loop.step = [&](const std::vector<std::size_t>& batch, Rng& rng) {
    const nn::Var<float> x(gather(inputs, batch)), y(gather(targets, batch));
    const auto out = net.forward(x, arch::Mode::kTrain, &rng);
    return losses::total_loss<float>(y, out, nullptr, nullptr, {0.0, 0.0, 0.0});
  };
  return run_loop(loop, ds.size(), cfg, io);
}

// ---------------------------------------------------------------------------
// TDRN

std::uint64_t prior_seed(std::uint64_t train_seed, std::size_t index) {
  return derive_seed(derive_seed(train_seed, 0x9121), index);
}

nn::Tensor<float> network_input(const Image& distorted, const priors::Priors* p, int in_channels) {
  require(in_channels >= 3 && in_channels <= 5, "network input must have 3, 4 or 5 channels");
  require(in_channels == 3 || p != nullptr, "priors required for a " + std::to_string(in_channels) + "-channel input");
  nn::Tensor<float> t(1, in_channels, distorted.height(), distorted.width());
  for (std::size_t i = 0; i < distorted.size(); ++i) t.data[i] = static_cast<float>(distorted.data()[i]);
  auto put = [&](int ch, const priors::PriorMap& m) {
    require(m.height == distorted.height() && m.width == distorted.width(), "prior map does not match the image");
    float* dst = t.ptr(0, ch);
    for (std::size_t i = 0; i < m.values.size(); ++i) dst[i] = static_cast<float>(m.values[i]);
  };
  if (in_channels >= 4) put(3, p->blur);
  if (in_channels >= 5) put(4, p->distortion);
  return t;
}

priors::Priors priors_for(const arch::Network<float>* dbn, const arch::Network<float>* gdrn, const Image& img,
                          int in_channels, int samples, Rng& rng) {
  priors::Priors p;
  if (in_channels < 4) return p;
  if (!dbn) fail(ErrorCode::kConfig, "blur prior requested but no DBN is loaded");
  Rng dbn_rng = rng.split();
  Rng gdrn_rng = rng.split();
  p.blur = priors::pixel_variance(priors::mc_sample(*dbn, img, samples, dbn_rng));
  if (in_channels >= 5) {
    if (!gdrn) fail(ErrorCode::kConfig, "distortion prior requested but no GDRN is loaded");
    p.distortion = priors::pixel_variance(priors::mc_sample(*gdrn, img, samples, gdrn_rng));
  }
  return p;
}

TrainResult train_tdrn(const PairDataset& ds, const arch::Network<float>* dbn, const arch::Network<float>* gdrn,
                       const TrainConfig& cfg, const RunIO& io, const TdrnVariant& variant,
                       const losses::FeatureExtractor<float>* features) {
  require(ds.role() == Role::kDeturbulence, "tdrn trains on a deturbulence dataset, got " + to_string(ds.role()));
  require(!ds.empty(), "training dataset is empty");
  if (variant.in_channels >= 4 && !dbn) fail(ErrorCode::kConfig, "train tdrn: missing DBN checkpoint");
  if (variant.in_channels >= 5 && !gdrn) fail(ErrorCode::kConfig, "train tdrn: missing GDRN checkpoint");
  cfg.validate();

  losses::LossWeights w = cfg.loss;
  if (!variant.confidence_loss) w.lambda_g = 0.0;
  std::optional<losses::FeatureExtractor<float>> desk;
  if (w.lambda_p > 0 && !features) features = &desk.emplace(losses::FeatureExtractor<float>::desk());

  auto tdrn = arch::Network<float>::init(arch::build_tdrn(variant.in_channels), derive_seed(cfg.seed, 1));
  auto cbs = losses::ConfidenceBlocks<float>::init(derive_seed(cfg.seed, 2));

  const std::uint64_t dbn_hash = dbn ? dbn->params().hash() : 0;
  const std::uint64_t gdrn_hash = gdrn ? gdrn->params().hash() : 0;

  // Priors depend only on (image, prior_seed), so each is computed once.
  std::vector<nn::Tensor<float>> inputs, targets;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Rng prng(prior_seed(cfg.seed, i));
    const auto p = priors_for(dbn, gdrn, ds.input(i), variant.in_channels, cfg.samples, prng);
    inputs.push_back(network_input(ds.input(i), &p, variant.in_channels));
    targets.push_back(to_tensor<float>(ds.target(i)));
  }

  Loop loop;
  loop.name = "tdrn";
  loop.modules = {{"tdrn", &tdrn}};
  if (w.lambda_g > 0)
    for (std::size_t i = 0; i < 3; ++i) loop.modules.push_back({losses::ConfidenceBlocks<float>::kNames[i], &cbs.nets[i]});
  loop.step = [&](const std::vector<std::size_t>& batch, Rng& rng) {
    const nn::Var<float> x(gather(inputs, batch)), y(gather(targets, batch));
    const auto out = tdrn.forward(x, arch::Mode::kTrain, &rng);
    return losses::total_loss<float>(y, out, &cbs, features, w);
  };
  loop.on_checkpoint = [&] {
    if ((dbn && dbn->params().hash() != dbn_hash) || (gdrn && gdrn->params().hash() != gdrn_hash))
      fail(ErrorCode::kInternal, "frozen prior network parameters changed during TDRN training");
  };
  return run_loop(loop, ds.size(), cfg, io);
}

// ---------------------------------------------------------------------------
// Restoration

Image restore(const Image& distorted, const arch::Network<float>* dbn, const arch::Network<float>* gdrn,
              const arch::Network<float>& tdrn, int samples, std::uint64_t seed) {
  const int in = tdrn.spec().in_channels();
  Rng rng(seed);
  const auto p = priors_for(dbn, gdrn, distorted, in, samples, rng);
  nn::NoGradGuard no_grad;
  const auto out = tdrn.forward(nn::Var<float>(network_input(distorted, &p, in)), arch::Mode::kDeterministic, nullptr);
  return to_image(out.value());
}

Restorer Restorer::load(const std::filesystem::path& dbn_ckpt, const std::filesystem::path& gdrn_ckpt,
                        const std::filesystem::path& tdrn_ckpt) {
  Restorer r;
  const Checkpoint tck = load_checkpoint(tdrn_ckpt);
  const ModuleState& tm = tck.module("tdrn");
  const int in = tm.spec.in_channels();
  if (in < 3 || in > 5 || !same_architecture(tm.spec, arch::build_tdrn(in)))
    fail(ErrorCode::kArchMismatch, tdrn_ckpt.string() + ": module 'tdrn' is not a restoration network");
  r.tdrn = tm.network();
  if (in >= 4) {
    if (dbn_ckpt.empty()) fail(ErrorCode::kConfig, "restore: this network needs a DBN checkpoint");
    r.dbn = load_checkpoint(dbn_ckpt, arch::build_dbn()).modules.front().network();
  }
  if (in >= 5) {
    if (gdrn_ckpt.empty()) fail(ErrorCode::kConfig, "restore: this network needs a GDRN checkpoint");
    r.gdrn = load_checkpoint(gdrn_ckpt, arch::build_gdrn()).modules.front().network();
  }
  return r;
}

Image Restorer::operator()(const Image& distorted, int samples, std::uint64_t seed) const {
  return restore(distorted, dbn ? &*dbn : nullptr, gdrn ? &*gdrn : nullptr, tdrn, samples, seed);
}

// ---------------------------------------------------------------------------
// Ablation

std::string AblationReport::table() const {
  std::string out = "method                      psnr      ssim      dvgg\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-26s  %8.4f  %8.6f  %8.6f\n", r.label.c_str(), r.psnr, r.ssim, r.dvgg);
    out += buf;
  }
  return out;
}

std::string AblationReport::json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) j.push_back({{"method", r.label}, {"psnr", r.psnr}, {"ssim", r.ssim}, {"dvgg", r.dvgg}});
  return j.dump(2) + "\n";
}

AblationReport run_ablation(const PairDataset& train, const PairDataset& test, const arch::Network<float>& dbn,
                            const arch::Network<float>& gdrn, const AblationConfig& cfg,
                            const losses::FeatureExtractor<float>& features, const std::filesystem::path& run_dir) {
  require(!test.empty(), "ablation test set is empty");
  AblationReport report;
  auto score = [&](const std::string& label, const std::function<Image(std::size_t)>& produce) {
    AblationRow row{label};
    for (std::size_t i = 0; i < test.size(); ++i) {
      const Image out = produce(i);
      row.psnr += eval::psnr(out, test.target(i));
      row.ssim += eval::ssim(out, test.target(i));
      row.dvgg += eval::feature_distance(features, out, test.target(i));
    }
    const double n = static_cast<double>(test.size());
    row.psnr /= n;
    row.ssim /= n;
    row.dvgg /= n;
    report.rows.push_back(row);
  };
  score("Turbulence-distorted", [&](std::size_t i) { return test.input(i); });

  static const char* kDirs[] = {"bn", "bn_b", "bn_b_d", "tdrn"};
  for (std::size_t v = 0; v < kAblationVariants.size(); ++v) {
    const auto& variant = kAblationVariants[v];
    log::info("ablation: training " + variant.label);
    RunIO io;
    if (!run_dir.empty()) io.run_dir = run_dir / kDirs[v];
    const auto res = train_tdrn(train, &dbn, &gdrn, cfg.tdrn, io, variant, &features);
    const auto net = res.checkpoint.module("tdrn").network();
    score(variant.label, [&](std::size_t i) {
      return restore(test.input(i), &dbn, &gdrn, net, cfg.eval_samples, derive_seed(cfg.eval_seed, i));
    });
  }
  return report;
}

}  // namespace tdrn::train
