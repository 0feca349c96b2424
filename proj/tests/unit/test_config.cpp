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

#include <functional>

#include "config.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace tdrn;
using namespace tdrn::config;

namespace {
ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}
}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.degrade.iterations == std::vector<int>{1000, 4000, 7000, 10000, 13000, 16000, 19000});
  CHECK(c.degrade.blurs.size() == 16);
  CHECK(c.degrade.grid().size() == 16 * 7);
  CHECK(c.train.tdrn.adam.learning_rate == 2e-4);
  CHECK(c.train.tdrn.batch_size == 10);
  CHECK(c.train.tdrn.iterations == 150000);
  CHECK(c.train.dbn.iterations == 100000);
  CHECK(c.priors.samples == 10);
  CHECK(c.loss.lambda_c == 0.01);
  CHECK(c.loss.lambda_g == 0.25);
  CHECK(c.loss.lambda_p == 0.1);
  CHECK(c.eval.ks == std::vector<int>{1, 3, 5});
}

TEST_CASE("echoed config parses back to the same config") {
  RunConfig c;
  c.data.image_size = 64;
  c.degrade.iterations = {0, 50};
  c.degrade.blurs = {turbsim::BlurSpec::motion(11), turbsim::BlurSpec::identity()};
  c.train.tdrn.iterations = 12;
  c.train.dbn_checkpoint = "runs/dbn.ckpt";
  c.loss.lambda_g = 0.5;
  c.eval.metrics = {"psnr"};
  const std::string text = c.to_json();
  const RunConfig back = RunConfig::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.checksum() == c.checksum());
  CHECK(RunConfig().checksum() != c.checksum());
  CHECK(c.checksum().size() == 16);
}

TEST_CASE("partial documents fill in defaults") {
  const RunConfig c = RunConfig::from_json(R"({"train":{"tdrn":{"iterations":7}}})");
  CHECK(c.train.tdrn.iterations == 7);
  CHECK(c.train.tdrn.batch_size == 10);
  CHECK(c.to_json() != RunConfig().to_json());
  CHECK(RunConfig::from_json("{}").to_json() == RunConfig().to_json());
}

TEST_CASE("unknown keys, bad types and invalid values are configuration errors") {
  CHECK(code_of([] { RunConfig::from_json(R"({"bogus":1})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"train":{"tdrn":{"lr":1}}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"degrade":{"blurs":[{"kind":"gaussian","size":5,"wat":1}]}})"); }) ==
        ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"data":{"image_size":"big"}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"train":{"tdrn":{"learning_rate":-1}}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"train":{"gdrn":{"batch_size":0}}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"priors":{"dropout_rate":1.5}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json(R"({"eval":{"metrics":["psnr","fid"]}})"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::from_json("{not json"); }) == ErrorCode::kConfig);
  CHECK(code_of([] { RunConfig::load("/nonexistent/cfg.json"); }) != ErrorCode::kInternal);
}

TEST_CASE("dotted set and seed application") {
  RunConfig c;
  c.set("train.tdrn.iterations", "33");
  CHECK(c.train.tdrn.iterations == 33);
  c.set("data.clean_dir", "faces");  // bare string
  CHECK(c.data.clean_dir == "faces");
  c.set("degrade.M", "[0, 10]");
  CHECK(c.degrade.iterations == std::vector<int>{0, 10});
  CHECK(code_of([&] { c.set("train.tdrn.nope", "1"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { c.set("train.tdrn.iterations", "0"); }) == ErrorCode::kConfig);

  apply_seed(c, 99);
  CHECK(c.degrade.master_seed == 99);
  CHECK(c.train.dbn.seed == 99);
  CHECK(c.train.gdrn.seed == 99);
  CHECK(c.train.tdrn.seed == 99);
  CHECK(c.eval.seed == 99);
}

TEST_CASE("resolved_train pulls S and loss weights from their sections") {
  RunConfig c;
  c.priors.samples = 4;
  c.loss.lambda_p = 0.3;
  const auto t = c.resolved_train("tdrn");
  CHECK(t.samples == 4);
  CHECK(t.loss.lambda_p == 0.3);
  const auto d = c.resolved_train("dbn");
  CHECK(d.loss.lambda_g == 0.0);
  CHECK(d.loss.lambda_p == 0.0);
  CHECK_THROWS_AS(c.resolved_train("vgg"), Error);
}

TEST_CASE("fnv1a_hex reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
