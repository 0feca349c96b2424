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

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "e2e.hpp"
#include "json.hpp"
#include "tdrn/tdrn.h"

using e2e::TempDir;
namespace fs = std::filesystem;

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { tdrn_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Cfg {
  tdrn_config* p = nullptr;
  ~Cfg() { tdrn_config_free(p); }
};

struct Img {
  tdrn_image* p = nullptr;
  ~Img() { tdrn_image_free(p); }
};

// Relative config paths resolve against the working directory.
struct Chdir {
  fs::path saved = fs::current_path();
  explicit Chdir(const fs::path& to) { fs::current_path(to); }
  ~Chdir() { fs::current_path(saved); }
};

Cfg tiny() {
  Cfg c;
  REQUIRE(tdrn_config_parse(e2e::kTinyConfig, &c.p) == TDRN_OK);
  return c;
}

std::vector<double> ramp(int h, int w) {
  std::vector<double> v(3 * h * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 97) / 96.0;
  return v;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strlen(tdrn_version()) > 0);
  CHECK(std::string(tdrn_status_string(TDRN_OK)) == "ok");
  CHECK(std::string(tdrn_status_string(TDRN_ERR_CONFIG)).size() > 0);
  CHECK(std::string(tdrn_status_string(static_cast<tdrn_status>(12345))).size() > 0);
}

TEST_CASE("null arguments are rejected with a message") {
  tdrn_config* c = nullptr;
  CHECK(tdrn_config_parse(nullptr, &c) == TDRN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(tdrn_last_error()).size() > 0);
  CHECK(tdrn_config_create(nullptr) == TDRN_ERR_INVALID_ARGUMENT);
  CHECK(tdrn_config_set(nullptr, "a", "1") == TDRN_ERR_INVALID_ARGUMENT);
  CHECK(tdrn_image_load(nullptr, nullptr) == TDRN_ERR_INVALID_ARGUMENT);
  double v = 0;
  CHECK(tdrn_psnr(nullptr, nullptr, &v) == TDRN_ERR_INVALID_ARGUMENT);
  CHECK(tdrn_train(nullptr, "dbn", "x", 0, nullptr, nullptr) == TDRN_ERR_INVALID_ARGUMENT);
  tdrn_config_free(nullptr);
  tdrn_image_free(nullptr);
  tdrn_restorer_free(nullptr);
  tdrn_string_free(nullptr);
}

TEST_CASE("config: parse, set, get, dump, checksum") {
  Cfg c = tiny();
  Str before, after, got, dump;
  REQUIRE(tdrn_config_checksum(c.p, &before.p) == TDRN_OK);
  CHECK(before.str().size() == 16);
  CHECK(tdrn_config_set(c.p, "train.tdrn.iterations", "9") == TDRN_OK);
  REQUIRE(tdrn_config_get(c.p, "train.tdrn.iterations", &got.p) == TDRN_OK);
  CHECK(got.str() == "9");
  REQUIRE(tdrn_config_checksum(c.p, &after.p) == TDRN_OK);
  CHECK(before.str() != after.str());

  CHECK(tdrn_config_set(c.p, "train.tdrn.bogus", "1") == TDRN_ERR_CONFIG);
  Str missing;
  CHECK(tdrn_config_get(c.p, "nope.nope", &missing.p) == TDRN_ERR_CONFIG);

  REQUIRE(tdrn_config_dump(c.p, &dump.p) == TDRN_OK);
  Cfg again;
  REQUIRE(tdrn_config_parse(dump.p, &again.p) == TDRN_OK);
  Str again_sum;
  REQUIRE(tdrn_config_checksum(again.p, &again_sum.p) == TDRN_OK);
  CHECK(again_sum.str() == after.str());

  REQUIRE(tdrn_config_set_seed(c.p, 77) == TDRN_OK);
  Str seed;
  REQUIRE(tdrn_config_get(c.p, "eval.seed", &seed.p) == TDRN_OK);
  CHECK(seed.str() == "77");

  Cfg bad;
  CHECK(tdrn_config_parse(R"({"unknown": 1})", &bad.p) == TDRN_ERR_CONFIG);
  CHECK(bad.p == nullptr);
  CHECK(std::string(tdrn_last_error()).find("unknown") != std::string::npos);
  CHECK(tdrn_config_load("/nonexistent/cfg.json", &bad.p) != TDRN_OK);
}

TEST_CASE("images: create, copy, save, load, metrics") {
  TempDir tmp("capi-img");
  const auto data = ramp(16, 16);
  Img a;
  REQUIRE(tdrn_image_create(16, 16, data.data(), &a.p) == TDRN_OK);
  int h = 0, w = 0;
  REQUIRE(tdrn_image_size(a.p, &h, &w) == TDRN_OK);
  CHECK(h == 16);
  CHECK(w == 16);
  std::vector<double> back(data.size());
  REQUIRE(tdrn_image_copy(a.p, back.data(), back.size()) == TDRN_OK);
  CHECK(back == data);
  CHECK(tdrn_image_copy(a.p, back.data(), back.size() - 1) == TDRN_ERR_INVALID_ARGUMENT);

  const std::string path = (tmp / "a.png").string();
  REQUIRE(tdrn_image_save(a.p, path.c_str()) == TDRN_OK);
  Img b;
  REQUIRE(tdrn_image_load(path.c_str(), &b.p) == TDRN_OK);
  double psnr = 0, ssim = 0;
  REQUIRE(tdrn_psnr(a.p, b.p, &psnr) == TDRN_OK);
  CHECK(psnr > 50.0);  // 8-bit quantisation only
  REQUIRE(tdrn_ssim(a.p, a.p, &ssim) == TDRN_OK);
  CHECK(ssim == 1.0);

  Img c;
  CHECK(tdrn_image_create(0, 10, data.data(), &c.p) == TDRN_ERR_INVALID_ARGUMENT);
  CHECK(tdrn_image_load((tmp / "missing.png").string().c_str(), &c.p) != TDRN_OK);
  CHECK(tdrn_image_create(4, 4, data.data(), &c.p) == TDRN_ERR_INVALID_ARGUMENT);
  Img small;
  REQUIRE(tdrn_image_create(8, 8, data.data(), &small.p) == TDRN_OK);
  CHECK(tdrn_psnr(a.p, small.p, &psnr) == TDRN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("pipeline through the C API") {
  TempDir tmp("capi-pipe");
  Chdir cd(tmp.path());
  Cfg c = tiny();

  size_t written = 0;
  REQUIRE(tdrn_synth("clean", 3, 40, 1, &written) == TDRN_OK);
  CHECK(written == 3);

  tdrn_degrade_summary sum{};
  Str manifest;
  REQUIRE(tdrn_degrade(c.p, nullptr, "data", &sum, &manifest.p) == TDRN_OK);
  CHECK(sum.images == 3);
  CHECK(sum.records == 3);
  CHECK(std::strlen(sum.manifest_checksum) == 16);
  CHECK(fs::exists(manifest.str()));

  SUBCASE("missing clean dir: IO or not-found status, nothing written") {
    tdrn_degrade_summary s2{};
    const auto st = tdrn_degrade(c.p, "no-such-dir", "data2", &s2, nullptr);
    CHECK(st != TDRN_OK);
    CHECK_FALSE(fs::exists("data2/manifest.jsonl"));
  }

  SUBCASE("evaluate passthrough clean gives perfect scores") {
    Str report;
    REQUIRE(tdrn_evaluate(c.p, nullptr, "eval", nullptr, "clean", &report.p) == TDRN_OK);
    const auto j = nlohmann::json::parse(e2e::read_file(report.str() + ".json"));
    REQUIRE(j["rows"].size() == 3);
    for (const auto& row : j["rows"]) CHECK(row["ssim"].get<double>() == 1.0);
    CHECK(tdrn_evaluate(c.p, nullptr, "eval", nullptr, "sideways", &report.p) == TDRN_ERR_INVALID_ARGUMENT);
  }

  SUBCASE("train, restore, evaluate") {
    Str ck;
    CHECK(tdrn_train(c.p, "tdrn", "runs/tdrn", 0, nullptr, &ck.p) == TDRN_ERR_CONFIG);  // priors not trained yet
    CHECK(tdrn_train(c.p, "vgg", "runs/x", 0, nullptr, &ck.p) != TDRN_OK);
    for (const char* which : {"dbn", "gdrn", "tdrn"}) {
      Str path;
      REQUIRE(tdrn_train(c.p, which, (std::string("runs/") + which).c_str(), 0, nullptr, &path.p) == TDRN_OK);
      CHECK(fs::exists(path.str()));
    }

    size_t n = 0;
    REQUIRE(tdrn_restore_files(c.p, "data/distorted", "restored", 0, 3, &n) == TDRN_OK);
    CHECK(n == 3);

    tdrn_restorer* r = nullptr;
    REQUIRE(tdrn_restorer_load("runs/dbn/dbn.ckpt", "runs/gdrn/gdrn.ckpt", "runs/tdrn/tdrn.ckpt", &r) == TDRN_OK);
    Img in, o1, o2;
    const auto first = fs::directory_iterator("data/distorted")->path().string();
    REQUIRE(tdrn_image_load(first.c_str(), &in.p) == TDRN_OK);
    REQUIRE(tdrn_restorer_run(r, in.p, 2, 5, &o1.p) == TDRN_OK);
    REQUIRE(tdrn_restorer_run(r, in.p, 2, 5, &o2.p) == TDRN_OK);
    double psnr = 0;
    REQUIRE(tdrn_psnr(o1.p, o2.p, &psnr) == TDRN_OK);
    CHECK(psnr == 100.0);
    tdrn_restorer_free(r);

    tdrn_restorer* wrong = nullptr;
    CHECK(tdrn_restorer_load(nullptr, nullptr, "runs/dbn/dbn.ckpt", &wrong) != TDRN_OK);
    CHECK(wrong == nullptr);
    e2e::write_file("junk.ckpt", "garbage");
    CHECK(tdrn_restorer_load(nullptr, nullptr, "junk.ckpt", &wrong) == TDRN_ERR_CORRUPT);

    Str report;
    REQUIRE(tdrn_evaluate(c.p, nullptr, "eval", nullptr, nullptr, &report.p) == TDRN_OK);
    const auto j = nlohmann::json::parse(e2e::read_file(report.str() + ".json"));
    CHECK(j["rows"].size() == 3);
  }
}

TEST_CASE("log callback receives library messages") {
  struct Sink {
    int count = 0;
  } sink;
  tdrn_set_log_callback([](int, const char*, void* user) { ++static_cast<Sink*>(user)->count; }, &sink);
  tdrn_set_log_level(TDRN_LOG_DEBUG);
  TempDir tmp("capi-log");
  size_t n = 0;
  REQUIRE(tdrn_synth(tmp.path().string().c_str(), 1, 32, 0, &n) == TDRN_OK);
  Cfg c = tiny();
  tdrn_degrade_summary s{};
  REQUIRE(tdrn_degrade(c.p, tmp.path().string().c_str(), (tmp / "d").string().c_str(), &s, nullptr) == TDRN_OK);
  tdrn_set_log_callback(nullptr, nullptr);
  tdrn_set_log_level(TDRN_LOG_INFO);
  CHECK(sink.count > 0);
}
