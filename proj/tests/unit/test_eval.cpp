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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eval.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace tdrn;
using namespace tdrn::eval;
using tdrn::testing::random_image;
using tdrn::testing::TempDir;
using tdrn::oracle::ssim_oracle;
using tdrn::oracle::top_k_oracle;

namespace {

Image add_noise(const Image& img, double std, std::uint64_t seed) {
  Rng rng(seed);
  Image out = img;
  for (double& v : out.data()) v += std * rng.normal();
  out.clamp01();
  return out;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  const Image a = random_image(8, 8, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(Image(8, 8, 0.0), Image(8, 8, 1.0)) == doctest::Approx(0.0).epsilon(1e-12));
  Image b(8, 8, 0.3), c(8, 8, 0.4);
  CHECK(std::abs(psnr(b, c) - 20.0) <= 1e-6);
  CHECK(psnr(b, c) == psnr(c, b));
  CHECK_THROWS_AS(psnr(a, Image(8, 9)), Error);
}

TEST_CASE("psnr strictly decreases with noise level") {
  const Image img = synth_face(32, 3);
  double prev = kPsnrCap + 1;
  for (double s : {0.01, 0.02, 0.05, 0.1}) {
    double acc = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) acc += psnr(img, add_noise(img, s, seed));
    CHECK(acc / 10 < prev);
    prev = acc / 10;
  }
}

TEST_CASE("ssim matches the per-window oracle on fixed 16x16 pairs") {
  const Image a = random_image(16, 16, 11);
  const Image b = add_noise(a, 0.1, 12);
  CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-6);
  const Image face = synth_face(16, 1), other = synth_face(16, 2);
  CHECK(std::abs(ssim(face, other) - ssim_oracle(face, other)) <= 1e-6);
  const Image wide = random_image(13, 21, 4), wide2 = random_image(13, 21, 5);
  CHECK(std::abs(ssim(wide, wide2) - ssim_oracle(wide, wide2)) <= 1e-6);
}

TEST_CASE("ssim identities and bounds") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = random_image(20, 20, s), b = random_image(20, 20, s + 50);
    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(ssim(a, b) >= -1.0);
    CHECK(ssim(a, b) <= 1.0);
  }
  CHECK_THROWS_AS(ssim(Image(10, 10), Image(10, 10)), Error);
}

TEST_CASE("feature distance matches a direct-norm oracle") {
  const auto f = losses::FeatureExtractor<float>::desk();
  const Image a = random_image(32, 32, 1), b = random_image(32, 32, 2), c = random_image(32, 32, 3);
  const auto ea = embed(f, a), eb = embed(f, b);
  double s = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) s += (ea[i] - eb[i]) * (ea[i] - eb[i]);
  CHECK(std::abs(feature_distance(f, a, b) - std::sqrt(s / ea.size())) <= 1e-6);
  CHECK(feature_distance(f, a, a) == 0.0);
  CHECK(feature_distance(f, a, c) <= feature_distance(f, a, b) + feature_distance(f, b, c) + 1e-12);
}

TEST_CASE("top-k: gallery equal to probes gives 1.0 everywhere") {
  std::vector<LabeledEmbedding> g;
  Rng rng(1);
  for (int i = 0; i < 6; ++i) {
    std::vector<double> e(8);
    for (double& v : e) v = rng.normal();
    g.push_back({"id" + std::to_string(i), e});
  }
  for (auto [k, acc] : top_k_accuracy(g, g, {1, 3, 5})) CHECK(acc == 1.0);
}

TEST_CASE("top-k on shuffled one-hot labels matches the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 7;
    std::vector<LabeledEmbedding> gallery, probes;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    for (int i = 0; i < n; ++i) {
      std::vector<double> e(n, 0.0);
      e[i] = 1.0;
      gallery.push_back({"L" + std::to_string(i), e});
      probes.push_back({"L" + std::to_string(perm[i]), e});
    }
    const std::vector<int> ks = {1, 2, 3, 5, 7, 10};
    const auto got = top_k_accuracy(probes, gallery, ks);
    const auto want = top_k_oracle(probes, gallery, ks);
    for (int k : ks) CHECK(std::abs(got.at(k) - want.at(k)) <= 1e-6);
    double prev = 0;
    for (int k : ks) {
      CHECK(got.at(k) >= prev);
      prev = got.at(k);
    }
    CHECK(got.at(7) == 1.0);
    CHECK(got.at(10) == 1.0);
    int fixed = 0;
    for (int i = 0; i < n; ++i) fixed += perm[i] == i;
    CHECK(got.at(1) == doctest::Approx(static_cast<double>(fixed) / n));
  }
}

TEST_CASE("top-k on random embeddings: oracle agreement and probe-order invariance") {
  Rng rng(5);
  std::vector<LabeledEmbedding> gallery, probes;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> e(6);
    for (double& v : e) v = rng.normal();
    gallery.push_back({"id" + std::to_string(i % 9), e});
  }
  for (int i = 0; i < 20; ++i) {
    std::vector<double> e = gallery[rng.uniform_int(12)].embedding;
    for (double& v : e) v += 0.8 * rng.normal();
    probes.push_back({"id" + std::to_string(rng.uniform_int(9)), e});
  }
  const std::vector<int> ks = {1, 3, 5};
  const auto got = top_k_accuracy(probes, gallery, ks);
  const auto want = top_k_oracle(probes, gallery, ks);
  for (int k : ks) CHECK(std::abs(got.at(k) - want.at(k)) <= 1e-6);
  auto reversed = probes;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(top_k_accuracy(reversed, gallery, ks) == got);
}

TEST_CASE("top-k errors") {
  std::vector<LabeledEmbedding> g = {{"a", {1, 0}}}, p = {{"a", {1, 0, 0}}};
  CHECK_THROWS_AS(top_k_accuracy(p, g, {1}), Error);
  CHECK_THROWS_AS(top_k_accuracy(g, {}, {1}), Error);
  CHECK_THROWS_AS(top_k_accuracy(g, g, {0}), Error);
}

TEST_CASE("evaluate_dataset: ground truth scored against itself") {
  TempDir tmp("eval");
  std::filesystem::create_directories(tmp / "clean");
  for (int i = 0; i < 3; ++i) write_png(synth_face(24, i), tmp / "clean" / ("f" + std::to_string(i) + ".png"));
  std::vector<turbsim::DegradationConfig> grid(2);
  grid[0].iterations = 20;
  grid[1].blur = turbsim::BlurSpec::gaussian(5, 1, 1, 0);
  turbsim::DatasetOptions opts;
  opts.image_size = 24;
  const auto m = turbsim::generate_dataset(tmp / "clean", grid, tmp / "ds", opts);
  const auto f = losses::FeatureExtractor<float>::desk();

  auto identity = [&](const Image&, std::size_t i) { return read_png(m.clean(i)); };
  const auto rep = evaluate_dataset(m, identity, f, {kAllMetrics, {1, 3}});
  REQUIRE(rep.rows.size() == m.records.size());
  for (const auto& r : rep.rows) {
    CHECK(r.psnr == kPsnrCap);
    CHECK(r.ssim == 1.0);
    CHECK(r.dvgg == 0.0);
  }
  CHECK(rep.top_k.at(1) == 1.0);

  auto pass = [](const Image& d, std::size_t) { return d; };
  const auto dist = evaluate_dataset(m, pass, f);
  double sum = 0;
  for (const auto& r : dist.rows) sum += r.psnr;
  CHECK(std::abs(dist.mean_psnr() - sum / dist.rows.size()) <= 1e-9);
  CHECK(dist.mean_psnr() < kPsnrCap);

  // Missing files are skipped; all missing is an error.
  std::filesystem::remove(m.distorted(0));
  const auto partial = evaluate_dataset(m, pass, f);
  CHECK(partial.rows.size() == m.records.size() - 1);
  CHECK(partial.skipped == 1);
  for (std::size_t i = 1; i < m.records.size(); ++i) std::filesystem::remove(m.distorted(i));
  CHECK_THROWS_AS(evaluate_dataset(m, pass, f), Error);
}

TEST_CASE("report table and sidecar agree") {
  MetricReport r;
  r.dataset = "manifest.jsonl@abc";
  r.config_checksum = "0123456789abcdef";
  r.rows = {{"a.png", 20.0, 0.5, 0.1}, {"b.png", 30.0, 0.7, 0.3}};
  r.top_k = {{1, 0.5}, {3, 1.0}};
  CHECK(r.mean_psnr() == 25.0);
  CHECK(r.mean_ssim() == doctest::Approx(0.6));
  const std::string t = r.table();
  CHECK(t.find("config_checksum: 0123456789abcdef") != std::string::npos);
  CHECK(t.find("a.png") != std::string::npos);
  const auto j = nlohmann::json::parse(r.json());
  CHECK(j["rows"].size() == 2);
  CHECK(j["mean"]["psnr"].get<double>() == 25.0);
  TempDir tmp("report");
  write_report(r, tmp / "report.txt");
  CHECK(testing::read_file(tmp / "report.txt") == t);
  CHECK(nlohmann::json::parse(testing::read_file(tmp / "report.txt.json")) == j);
}
