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
#include <fstream>

#include "json.hpp"

#include "support.hpp"
#include "train.hpp"

using namespace tdrn;
using namespace tdrn::train;
using tdrn::testing::TempDir;

namespace {

struct Pairs {
  std::vector<Image> clean, turb, blur, warped;
};

Pairs make_pairs(int n, int size, std::uint64_t seed) {
  Pairs p;
  const auto bank = turbsim::gaussian_kernel_bank(seed);
  for (int i = 0; i < n; ++i) {
    const Image c = synth_face(size, seed * 100 + i);
    turbsim::DegradationConfig cfg;
    cfg.blur = bank[i % bank.size()];
    cfg.iterations = 300;
    cfg.seed = seed * 1000 + i;
    p.turb.push_back(turbsim::degrade(c, cfg).image);
    auto cb = cfg;
    cb.iterations = 0;
    cb.noise_std = 0;
    p.blur.push_back(turbsim::degrade(c, cb).image);
    auto cw = cfg;
    cw.blur = turbsim::BlurSpec::identity();
    cw.noise_std = 0;
    p.warped.push_back(turbsim::degrade(c, cw).image);
    p.clean.push_back(c);
  }
  return p;
}

TrainConfig small(const std::string& which, int iterations, int batch = 2) {
  auto c = default_config(which);
  c.iterations = iterations;
  c.batch_size = batch;
  c.samples = 2;
  c.seed = 5;
  return c;
}

void check_same_losses(const std::vector<LossRecord>& a, const std::vector<LossRecord>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].iter == b[i].iter);
    CHECK(a[i].l1 == b[i].l1);
    CHECK(a[i].lg == b[i].lg);
    CHECK(a[i].lp == b[i].lp);
    CHECK(a[i].lfinal == b[i].lfinal);
  }
}

struct Priors2 {
  arch::Network<float> dbn, gdrn;
};

Priors2 tiny_priors(const Pairs& p) {
  const auto d = train_restorer("dbn", PairDataset::from_images(p.blur, p.clean, Role::kDeblur), small("dbn", 3));
  const auto g = train_restorer("gdrn", PairDataset::from_images(p.warped, p.clean, Role::kDewarp), small("gdrn", 3));
  return {d.checkpoint.module("dbn").network(), g.checkpoint.module("gdrn").network()};
}

}  // namespace

TEST_CASE("role names round-trip") {
  for (Role r : {Role::kDeblur, Role::kDewarp, Role::kDeturbulence}) CHECK(role_from_string(to_string(r)) == r);
  CHECK_THROWS_AS(role_from_string("x"), Error);
}

TEST_CASE("default configs and validation") {
  CHECK(default_config("dbn").iterations == kDefaultRestorerIterations);
  CHECK(default_config("tdrn").iterations == kDefaultTdrnIterations);
  CHECK(default_config("tdrn").adam.learning_rate == 2e-4);
  auto c = default_config("tdrn");
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(default_config("vgg"), Error);
}

TEST_CASE("loss lines round-trip") {
  const LossRecord r{17, 0.125, 0.5, 0.0078125, 0.25, 3.5};
  const auto back = parse_loss_line(loss_line(r));
  CHECK(back.iter == 17);
  CHECK(back.l1 == r.l1);
  CHECK(back.lg == r.lg);
  CHECK(back.lp == r.lp);
  CHECK(back.lfinal == r.lfinal);
  CHECK(checkpoint_filename("tdrn", 40) == "tdrn_iter00000040.ckpt");
}

TEST_CASE("restorer overfits four pairs") {
  const Pairs p = make_pairs(4, 32, 1);
  auto cfg = small("dbn", 500, 4);
  const auto r = train_restorer("dbn", PairDataset::from_images(p.blur, p.clean, Role::kDeblur), cfg, 0.0);
  REQUIRE(r.log.size() == 500);
  double head = 0, tail = 0;
  for (int i = 0; i < 10; ++i) head += r.log[i].l1, tail += r.log[490 + i].l1;
  CHECK(tail < 0.5 * head);
}

TEST_CASE("a tiny learning rate barely moves the loss, a sane one lowers it") {
  const Pairs p = make_pairs(2, 32, 2);
  const auto ds = PairDataset::from_images(p.blur, p.clean, Role::kDeblur);
  auto cfg = small("dbn", 30, 2);
  const auto base = train_restorer("dbn", ds, cfg, 0.0);
  cfg.adam.learning_rate = 1e-9;
  const auto frozen = train_restorer("dbn", ds, cfg, 0.0);
  // Same sampled batches; the first step uses untouched weights in both runs.
  CHECK(base.log[0].l1 == frozen.log[0].l1);
  CHECK(std::abs(frozen.log.back().l1 - frozen.log[0].l1) < 0.02);
  CHECK(base.log.back().l1 < frozen.log.back().l1);
}

TEST_CASE("same seed, same loss log; different seed, different log") {
  const Pairs p = make_pairs(3, 32, 3);
  const auto pr = tiny_priors(p);
  const auto ds = PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence);
  const auto cfg = small("tdrn", 4);
  const auto a = train_tdrn(ds, &pr.dbn, &pr.gdrn, cfg);
  const auto b = train_tdrn(ds, &pr.dbn, &pr.gdrn, cfg);
  check_same_losses(a.log, b.log);
  CHECK(a.checkpoint == b.checkpoint);
  auto other = cfg;
  other.seed = 6;
  CHECK(train_tdrn(ds, &pr.dbn, &pr.gdrn, other).log[0].l1 != a.log[0].l1);
}

TEST_CASE("prior networks stay frozen while TDRN trains") {
  const Pairs p = make_pairs(2, 32, 4);
  const auto pr = tiny_priors(p);
  const auto hd = pr.dbn.params().hash(), hg = pr.gdrn.params().hash();
  const auto r = train_tdrn(PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence), &pr.dbn, &pr.gdrn,
                            small("tdrn", 3));
  CHECK(pr.dbn.params().hash() == hd);
  CHECK(pr.gdrn.params().hash() == hg);
  CHECK(r.checkpoint.has_module("tdrn"));
  CHECK_FALSE(r.checkpoint.has_module("dbn"));
  CHECK(r.checkpoint.modules.size() == 4);  // tdrn + three confidence blocks
}

TEST_CASE("resuming K + K iterations equals 2K straight") {
  const Pairs p = make_pairs(3, 32, 5);
  const auto pr = tiny_priors(p);
  const auto ds = PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence);
  TempDir straight("train-straight"), split("train-split");

  auto cfg = small("tdrn", 6);
  RunIO io_s;
  io_s.run_dir = straight.path();
  const auto full = train_tdrn(ds, &pr.dbn, &pr.gdrn, cfg, io_s);

  cfg.iterations = 3;
  RunIO io_a;
  io_a.run_dir = split.path();
  const auto first = train_tdrn(ds, &pr.dbn, &pr.gdrn, cfg, io_a);
  cfg.iterations = 6;
  RunIO io_b = io_a;
  io_b.resume_from = first.checkpoint_path;
  const auto second = train_tdrn(ds, &pr.dbn, &pr.gdrn, cfg, io_b);

  auto joined = first.log;
  joined.insert(joined.end(), second.log.begin(), second.log.end());
  check_same_losses(joined, full.log);
  CHECK(second.checkpoint == full.checkpoint);

  const auto log_s = read_loss_log(straight / kLossLogName), log_p = read_loss_log(split / kLossLogName);
  check_same_losses(log_s, log_p);
  CHECK(log_s.size() == 6);
}

TEST_CASE("checkpoint interval writes periodic checkpoints") {
  const Pairs p = make_pairs(2, 32, 6);
  TempDir run("train-interval");
  auto cfg = small("gdrn", 5);
  cfg.checkpoint_interval = 2;
  RunIO io;
  io.run_dir = run.path();
  const auto r = train_restorer("gdrn", PairDataset::from_images(p.warped, p.clean, Role::kDewarp), cfg, 0.1, io);
  for (int it : {2, 4, 5}) CHECK(std::filesystem::exists(run / checkpoint_filename("gdrn", it)));
  CHECK_FALSE(std::filesystem::exists(run / checkpoint_filename("gdrn", 3)));
  CHECK(std::filesystem::exists(run / "gdrn.ckpt"));
  CHECK(load_checkpoint(run / "gdrn.ckpt") == r.checkpoint);
  CHECK(r.checkpoint.iteration == 5);
}

TEST_CASE("restore: shape, determinism and seed use") {
  const Pairs p = make_pairs(2, 32, 7);
  const auto pr = tiny_priors(p);
  const auto r = train_tdrn(PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence), &pr.dbn, &pr.gdrn,
                            small("tdrn", 2));
  const auto net = r.checkpoint.module("tdrn").network();
  const Image a = restore(p.turb[0], &pr.dbn, &pr.gdrn, net, 3, 9);
  CHECK(a.height() == 32);
  CHECK(a.width() == 32);
  CHECK(restore(p.turb[0], &pr.dbn, &pr.gdrn, net, 3, 9) == a);
  CHECK_FALSE(restore(p.turb[0], &pr.dbn, &pr.gdrn, net, 3, 10) == a);

  // Without dropout the priors are zero whatever the seed.
  auto d0 = pr.dbn, g0 = pr.gdrn;
  d0.set_dropout_rate(0.0);
  g0.set_dropout_rate(0.0);
  CHECK(restore(p.turb[0], &d0, &g0, net, 3, 1) == restore(p.turb[0], &d0, &g0, net, 3, 2));
  CHECK_THROWS_AS(restore(p.turb[0], &pr.dbn, &pr.gdrn, net, 0, 1), Error);
}

TEST_CASE("ablation report: baseline plus four variants") {
  const Pairs p = make_pairs(3, 32, 8);
  const auto pr = tiny_priors(p);
  AblationConfig cfg;
  cfg.tdrn = small("tdrn", 2);
  cfg.eval_samples = 2;
  const auto rep = run_ablation(PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence),
                                PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence), pr.dbn, pr.gdrn, cfg,
                                losses::FeatureExtractor<float>::desk());
  REQUIRE(rep.rows.size() == 5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(rep.rows[i + 1].label == kAblationVariants[i].label);
  for (const auto& row : rep.rows) {
    CHECK(std::isfinite(row.psnr));
    CHECK(row.ssim <= 1.0);
    CHECK(row.dvgg >= 0.0);
  }
  const auto j = nlohmann::json::parse(rep.json());
  REQUIRE(j.size() == 5);
  CHECK(j[0]["method"] == rep.rows[0].label);
  for (const auto& row : rep.rows) CHECK(rep.table().find(row.label) != std::string::npos);
}

TEST_CASE("empty datasets and missing priors are rejected") {
  const Pairs p = make_pairs(1, 32, 9);
  CHECK_THROWS_AS(train_restorer("dbn", PairDataset::from_images({}, {}, Role::kDeblur), small("dbn", 1)), Error);
  const auto ds = PairDataset::from_images(p.turb, p.clean, Role::kDeturbulence);
  CHECK_THROWS_AS(train_tdrn(ds, nullptr, nullptr, small("tdrn", 1)), Error);
  // The base variant takes no priors.
  CHECK_NOTHROW(train_tdrn(ds, nullptr, nullptr, small("tdrn", 1), {}, kAblationVariants[0]));
}
