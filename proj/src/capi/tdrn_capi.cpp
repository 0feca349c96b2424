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

#include "tdrn/tdrn.h"

#include <cstdlib>
#include <cstring>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "eval.hpp"
#include "json.hpp"
#include "log.hpp"
#include "pipeline.hpp"

struct tdrn_config {
  tdrn::config::RunConfig cfg;
};

struct tdrn_image {
  tdrn::Image img;
};

struct tdrn_restorer {
  tdrn::train::Restorer r;
};

namespace {

thread_local std::string g_last_error;

tdrn_status set_error(tdrn_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

/// Runs fn, translating exceptions into status codes.
template <typename F>
tdrn_status guard(F&& fn) {
  g_last_error.clear();
  try {
    fn();
    return TDRN_OK;
  } catch (const tdrn::Error& e) {
    return set_error(static_cast<tdrn_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(TDRN_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return set_error(TDRN_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(TDRN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(TDRN_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) tdrn::fail(tdrn::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

std::string str_or_empty(const char* s) { return s ? s : ""; }

tdrn_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void forward_log(int level, const char* message, void*) {
  if (g_log_fn) g_log_fn(level, message, g_log_user);
}

}  // namespace

extern "C" {

const char* tdrn_version(void) { return "0.1.0"; }

const char* tdrn_last_error(void) { return g_last_error.c_str(); }

const char* tdrn_status_string(tdrn_status status) {
  switch (status) {
    case TDRN_OK: return "ok";
    case TDRN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TDRN_ERR_IO: return "i/o error";
    case TDRN_ERR_CONFIG: return "configuration error";
    case TDRN_ERR_ARCH_MISMATCH: return "architecture mismatch";
    case TDRN_ERR_CORRUPT: return "corrupt file";
    case TDRN_ERR_DIVERGED: return "training diverged";
    case TDRN_ERR_NOT_FOUND: return "not found";
    case TDRN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void tdrn_string_free(char* s) { std::free(s); }

void tdrn_set_log_callback(tdrn_log_fn fn, void* user) {
  g_log_fn = fn;
  g_log_user = user;
  tdrn::log::set_sink(fn ? forward_log : nullptr, nullptr);
}

void tdrn_set_log_level(tdrn_log_level level) { tdrn::log::set_min_level(static_cast<tdrn::log::Level>(level)); }

// ---- configuration

tdrn_status tdrn_config_create(tdrn_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new tdrn_config{};
  });
}

tdrn_status tdrn_config_load(const char* path, tdrn_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new tdrn_config{tdrn::config::RunConfig::load(path)};
  });
}

tdrn_status tdrn_config_parse(const char* json, tdrn_config** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new tdrn_config{tdrn::config::RunConfig::from_json(json)};
  });
}

void tdrn_config_free(tdrn_config* cfg) { delete cfg; }

tdrn_status tdrn_config_set(tdrn_config* cfg, const char* key, const char* json_value) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(json_value, "json_value");
    cfg->cfg.set(key, json_value);
  });
}

tdrn_status tdrn_config_set_seed(tdrn_config* cfg, uint64_t seed) {
  return guard([&] {
    need(cfg, "cfg");
    tdrn::config::apply_seed(cfg->cfg, seed);
  });
}

tdrn_status tdrn_config_get(const tdrn_config* cfg, const char* key, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(json_out, "json_out");
    const auto root = nlohmann::json::parse(cfg->cfg.to_json());
    std::string ptr = "/";
    for (const char* c = key; *c; ++c) ptr += *c == '.' ? '/' : *c;
    const nlohmann::json::json_pointer p(ptr);
    if (!root.contains(p)) tdrn::fail(tdrn::ErrorCode::kConfig, std::string("unknown config key '") + key + "'");
    *json_out = dup(root.at(p).dump());
  });
}

tdrn_status tdrn_config_dump(const tdrn_config* cfg, char** json_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(json_out, "json_out");
    *json_out = dup(cfg->cfg.to_json());
  });
}

tdrn_status tdrn_config_checksum(const tdrn_config* cfg, char** hex_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(hex_out, "hex_out");
    *hex_out = dup(cfg->cfg.checksum());
  });
}

tdrn_status tdrn_default_run_dir(const tdrn_config* cfg, const char* label, char** path_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(label, "label");
    need(path_out, "path_out");
    *path_out = dup(tdrn::pipeline::default_run_dir(label, cfg->cfg).string());
  });
}

// ---- pipeline

tdrn_status tdrn_degrade(const tdrn_config* cfg, const char* clean_dir, const char* out_dir,
                         tdrn_degrade_summary* summary, char** manifest_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    const std::string clean = clean_dir ? clean_dir : cfg->cfg.data.clean_dir;
    if (clean.empty()) tdrn::fail(tdrn::ErrorCode::kConfig, "no clean image directory: set data.clean_dir");
    const auto s = tdrn::pipeline::cmd_degrade(cfg->cfg, clean, out_dir);
    if (summary) {
      summary->images = s.images;
      summary->records = s.records;
      std::snprintf(summary->manifest_checksum, sizeof summary->manifest_checksum, "%s", s.manifest_checksum.c_str());
    }
    if (manifest_out) *manifest_out = dup(s.manifest.string());
  });
}

tdrn_status tdrn_train(const tdrn_config* cfg, const char* which, const char* run_dir, int resume,
                       const char* resume_from, char** checkpoint_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(which, "which");
    need(run_dir, "run_dir");
    tdrn::pipeline::TrainRequest req;
    req.which = which;
    if (req.which != "dbn" && req.which != "gdrn" && req.which != "tdrn")
      tdrn::fail(tdrn::ErrorCode::kInvalidArgument, "train: expected dbn, gdrn or tdrn, got '" + req.which + "'");
    req.run_dir = run_dir;
    req.resume = resume != 0;
    req.resume_from = str_or_empty(resume_from);
    const auto path = tdrn::pipeline::cmd_train(cfg->cfg, req);
    if (checkpoint_out) *checkpoint_out = dup(path.string());
  });
}

tdrn_status tdrn_restore_files(const tdrn_config* cfg, const char* input, const char* out_dir, int samples,
                               uint64_t seed, size_t* written) {
  return guard([&] {
    need(cfg, "cfg");
    need(input, "input");
    need(out_dir, "out_dir");
    const int s = samples > 0 ? samples : cfg->cfg.priors.samples;
    const auto n = tdrn::pipeline::cmd_restore(cfg->cfg, input, out_dir, s, seed);
    if (written) *written = n;
  });
}

tdrn_status tdrn_evaluate(const tdrn_config* cfg, const char* manifest, const char* out_dir,
                          const char* restored_dir, const char* passthrough, char** report_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    tdrn::pipeline::EvaluateRequest req;
    req.manifest = str_or_empty(manifest);
    req.out_dir = out_dir;
    req.restored_dir = str_or_empty(restored_dir);
    req.passthrough = str_or_empty(passthrough);
    const auto path = tdrn::pipeline::cmd_evaluate(cfg->cfg, req);
    if (report_out) *report_out = dup(path.string());
  });
}

tdrn_status tdrn_ablate(const tdrn_config* cfg, const char* run_dir, char** report_out) {
  return guard([&] {
    need(cfg, "cfg");
    need(run_dir, "run_dir");
    const auto path = tdrn::pipeline::cmd_ablate(cfg->cfg, run_dir);
    if (report_out) *report_out = dup(path.string());
  });
}

tdrn_status tdrn_synth(const char* out_dir, int count, int size, uint64_t seed, size_t* written) {
  return guard([&] {
    need(out_dir, "out_dir");
    const auto n = tdrn::pipeline::cmd_synth(out_dir, count, size, seed);
    if (written) *written = n;
  });
}

// ---- images and metrics

tdrn_status tdrn_image_create(int height, int width, const double* planar_rgb, tdrn_image** out) {
  return guard([&] {
    need(out, "out");
    tdrn::Image img(height, width);
    if (planar_rgb) std::memcpy(img.data().data(), planar_rgb, img.size() * sizeof(double));
    for (double v : img.data())
      if (!(v >= 0.0 && v <= 1.0)) tdrn::fail(tdrn::ErrorCode::kInvalidArgument, "image values must lie in [0,1]");
    *out = new tdrn_image{std::move(img)};
  });
}

tdrn_status tdrn_image_load(const char* path, tdrn_image** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new tdrn_image{tdrn::read_png(path)};
  });
}

tdrn_status tdrn_image_save(const tdrn_image* img, const char* path) {
  return guard([&] {
    need(img, "img");
    need(path, "path");
    tdrn::write_png(img->img, path);
  });
}

void tdrn_image_free(tdrn_image* img) { delete img; }

tdrn_status tdrn_image_size(const tdrn_image* img, int* height, int* width) {
  return guard([&] {
    need(img, "img");
    if (height) *height = img->img.height();
    if (width) *width = img->img.width();
  });
}

tdrn_status tdrn_image_copy(const tdrn_image* img, double* dst, size_t capacity) {
  return guard([&] {
    need(img, "img");
    need(dst, "dst");
    if (capacity < img->img.size())
      tdrn::fail(tdrn::ErrorCode::kInvalidArgument, "destination holds " + std::to_string(capacity) +
                                                         " values, image has " + std::to_string(img->img.size()));
    std::memcpy(dst, img->img.data().data(), img->img.size() * sizeof(double));
  });
}

tdrn_status tdrn_psnr(const tdrn_image* a, const tdrn_image* b, double* out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = tdrn::eval::psnr(a->img, b->img);
  });
}

tdrn_status tdrn_ssim(const tdrn_image* a, const tdrn_image* b, double* out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = tdrn::eval::ssim(a->img, b->img);
  });
}

// ---- restoration

tdrn_status tdrn_restorer_load(const char* dbn_ckpt, const char* gdrn_ckpt, const char* tdrn_ckpt,
                               tdrn_restorer** out) {
  return guard([&] {
    need(tdrn_ckpt, "tdrn_ckpt");
    need(out, "out");
    *out = new tdrn_restorer{tdrn::train::Restorer::load(str_or_empty(dbn_ckpt), str_or_empty(gdrn_ckpt), tdrn_ckpt)};
  });
}

void tdrn_restorer_free(tdrn_restorer* r) { delete r; }

tdrn_status tdrn_restorer_run(const tdrn_restorer* r, const tdrn_image* distorted, int samples, uint64_t seed,
                              tdrn_image** out) {
  return guard([&] {
    need(r, "restorer");
    need(distorted, "distorted");
    need(out, "out");
    *out = new tdrn_image{r->r(distorted->img, samples, seed)};
  });
}

}  // extern "C"
