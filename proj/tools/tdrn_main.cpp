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

// tdrn command-line front end. Talks to the library through the C API only.
//
// Precedence for every setting: command-line flags > --config file > defaults.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tdrn/tdrn.h"

namespace {

struct Failure {
  tdrn_status status;
};

void check(tdrn_status s, const char* what) {
  if (s == TDRN_OK) return;
  std::fprintf(stderr, "tdrn %s: %s: %s\n", what, tdrn_status_string(s), tdrn_last_error());
  throw Failure{s};
}

/// Library-owned string released on scope exit.
class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { tdrn_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }

 private:
  char* p_ = nullptr;
};

class Config {
 public:
  Config() = default;
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { tdrn_config_free(c_); }

  void load(const std::string& path) {
    tdrn_config_free(c_);
    c_ = nullptr;
    check(path.empty() ? tdrn_config_create(&c_) : tdrn_config_load(path.c_str(), &c_), "config");
  }
  void set(const std::string& key, const std::string& value) {
    check(tdrn_config_set(c_, key.c_str(), value.c_str()), ("--set " + key).c_str());
  }
  void seed(std::uint64_t s) { check(tdrn_config_set_seed(c_, s), "--seed"); }
  std::string run_dir(const std::string& label) const {
    OwnedString p;
    check(tdrn_default_run_dir(c_, label.c_str(), p.out()), "run dir");
    return p.str();
  }
  std::string get(const std::string& key) const {
    OwnedString p;
    check(tdrn_config_get(c_, key.c_str(), p.out()), "config");
    return p.str();
  }
  std::string dump() const {
    OwnedString p;
    check(tdrn_config_dump(c_, p.out()), "config");
    return p.str();
  }
  const tdrn_config* get() const { return c_; }

 private:
  tdrn_config* c_ = nullptr;
};

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> sets;
  int samples = 0;
  bool verbose = false;
  bool quiet = false;
};

void apply_globals(Config& cfg, const Globals& g) {
  cfg.load(g.config_path);
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "tdrn: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{TDRN_ERR_INVALID_ARGUMENT};
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed_given) cfg.seed(g.seed);
  if (g.samples > 0) cfg.set("priors.S", std::to_string(g.samples));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turbulence degradation, prior-guided restoration and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tdrn_version()));

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option_function<std::uint64_t>(
      "--seed",
      [&](const std::uint64_t& s) {
        g.seed = s;
        g.seed_given = true;
      },
      "Master seed for degradation, training and evaluation");
  app.add_option("--set", g.sets, "Override one config key, e.g. --set train.tdrn.batch_size=8");
  app.add_option("--S", g.samples, "Monte Carlo samples per prior estimate")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");
  app.fallthrough();

  std::string out;
  long long iterations = 0;

  auto* degrade = app.add_subcommand("degrade", "Build the deturbulence, deblur and dewarp datasets");
  std::string clean_dir;
  degrade->add_option("--clean", clean_dir, "Directory of clean PNG images (default data.clean_dir)");
  degrade->add_option("--out", out, "Output dataset directory");

  auto* train = app.add_subcommand("train", "Train a network");
  std::string which;
  std::string resume_from;
  train->add_option("which", which, "dbn, gdrn or tdrn")->required()->check(CLI::IsMember({"dbn", "gdrn", "tdrn"}));
  train->add_option("--out", out, "Run directory");
  auto* resume = train->add_option("--resume", resume_from, "Resume from a checkpoint (default: newest in the run dir)")
                     ->expected(0, 1);
  train->add_option("--iterations", iterations, "Iteration count")->check(CLI::PositiveNumber);

  auto* restore = app.add_subcommand("restore", "Restore one image or a directory of images");
  std::string input;
  restore->add_option("--input", input, "PNG file or directory")->required();
  restore->add_option("--out", out, "Output directory");

  auto* evaluate = app.add_subcommand("evaluate", "Score restorations against ground truth");
  std::string manifest, restored, passthrough;
  evaluate->add_option("--manifest", manifest, "Dataset manifest (default: data.test_dir or data.dataset_dir)");
  evaluate->add_option("--out", out, "Report directory");
  evaluate->add_option("--restored", restored, "Score pre-restored images from this directory");
  evaluate->add_option("--passthrough", passthrough, "Score the clean or distorted image as the restoration")
      ->check(CLI::IsMember({"clean", "distorted"}));

  auto* ablate = app.add_subcommand("ablate", "Train and score the four ablation variants");
  ablate->add_option("--out", out, "Run directory");
  ablate->add_option("--iterations", iterations, "Iterations for every trained network")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write synthetic clean faces");
  int count = 8, size = 64;
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "Side length in pixels")->check(CLI::Range(8, 4096));

  auto* show = app.add_subcommand("config", "Print the resolved configuration");

  CLI11_PARSE(app, argc, argv);

  tdrn_set_log_level(g.verbose ? TDRN_LOG_DEBUG : g.quiet ? TDRN_LOG_WARN : TDRN_LOG_INFO);

  try {
    if (*synth) {
      size_t n = 0;
      check(tdrn_synth(out.c_str(), count, size, g.seed, &n), "synth");
      std::printf("wrote %zu images to %s\n", n, out.c_str());
      return 0;
    }

    Config cfg;
    apply_globals(cfg, g);

    if (*show) {
      std::printf("%s\n", cfg.dump().c_str());
    } else if (*degrade) {
      if (!clean_dir.empty()) cfg.set("data.clean_dir", clean_dir);
      if (out.empty()) out = cfg.run_dir("degrade");
      tdrn_degrade_summary s{};
      OwnedString path;
      check(tdrn_degrade(cfg.get(), nullptr, out.c_str(), &s, path.out()), "degrade");
      std::printf("images %zu\nrecords %zu\nmanifest %s\nmanifest checksum %s\n", s.images, s.records,
                  path.str().c_str(), s.manifest_checksum);
    } else if (*train) {
      if (iterations > 0) cfg.set("train." + which + ".iterations", std::to_string(iterations));
      if (out.empty()) out = cfg.run_dir("train-" + which);
      OwnedString ckpt;
      check(tdrn_train(cfg.get(), which.c_str(), out.c_str(), resume->count() > 0, resume_from.c_str(), ckpt.out()),
            "train");
      std::printf("checkpoint %s\n", ckpt.str().c_str());
    } else if (*restore) {
      if (out.empty()) out = cfg.run_dir("restore");
      const std::uint64_t seed = std::stoull(cfg.get("eval.seed"));
      size_t n = 0;
      check(tdrn_restore_files(cfg.get(), input.c_str(), out.c_str(), 0, seed, &n), "restore");
      std::printf("restored %zu images into %s\n", n, out.c_str());
    } else if (*evaluate) {
      if (out.empty()) out = cfg.run_dir("evaluate");
      OwnedString report;
      check(tdrn_evaluate(cfg.get(), manifest.empty() ? nullptr : manifest.c_str(), out.c_str(),
                          restored.empty() ? nullptr : restored.c_str(),
                          passthrough.empty() ? nullptr : passthrough.c_str(), report.out()),
            "evaluate");
      std::printf("report %s\n", report.str().c_str());
    } else if (*ablate) {
      if (iterations > 0)
        for (const char* net : {"dbn", "gdrn", "tdrn"})
          cfg.set(std::string("train.") + net + ".iterations", std::to_string(iterations));
      if (out.empty()) out = cfg.run_dir("ablate");
      OwnedString report;
      check(tdrn_ablate(cfg.get(), out.c_str(), report.out()), "ablate");
      std::printf("report %s\n", report.str().c_str());
    }
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
