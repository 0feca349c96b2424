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

#include "losses.hpp"
#include "oracles.hpp"
#include "priors.hpp"
#include "support.hpp"

using namespace tdrn;
using namespace tdrn::nn;
using tdrn::testing::random_image;
using tdrn::testing::random_tensor;
using tdrn::oracle::brute_variance;

namespace {

Tensor<double> from_rows(int c, int h, int w, const std::vector<double>& v) {
  Tensor<double> t(1, c, h, w);
  t.data.assign(v.begin(), v.end());
  return t;
}

// Direct reflect-101 stencil evaluation at one pixel.
double stencil_at(const Tensor<double>& x, int c, int y, int xx, const std::array<double, 9>& k) {
  auto r = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  double s = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) s += k[(dy + 1) * 3 + dx + 1] * x.at(0, c, r(y + dy, x.h), r(xx + dx, x.w));
  return s;
}

}  // namespace

// ---- priors

TEST_CASE("pixel_variance matches a two-pass oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    priors::SampleSet s;
    for (int i = 0; i < 7; ++i) s.push_back(random_tensor<float>(1, 3, 8, 8, seed * 100 + i, 0, 1));
    const auto got = priors::pixel_variance(s);
    const auto want = brute_variance(s);
    REQUIRE(got.values.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got.values[i] - want[i]) <= 1e-9);
  }
}

TEST_CASE("pixel_variance of identical samples is zero") {
  const auto t = random_tensor<float>(1, 3, 8, 8, 1, 0, 1);
  const auto v = priors::pixel_variance(priors::SampleSet(10, t));
  for (double x : v.values) CHECK(x == 0.0);
  CHECK_THROWS_AS(priors::pixel_variance({}), Error);
}

TEST_CASE("dropout rate zero gives exactly zero priors") {
  const auto dbn = arch::Network<float>::init(arch::build_dbn(0.0), 1);
  const auto gdrn = arch::Network<float>::init(arch::build_gdrn(0.0), 2);
  Rng rng(3);
  const auto p = priors::estimate_priors(dbn, gdrn, random_image(16, 16, 4), 5, rng);
  for (double v : p.blur.values) CHECK(v == 0.0);
  for (double v : p.distortion.values) CHECK(v == 0.0);
}

TEST_CASE("priors are nonnegative, shaped like the input and seeded") {
  const auto dbn = arch::Network<float>::init(arch::build_dbn(0.2), 1);
  const auto gdrn = arch::Network<float>::init(arch::build_gdrn(0.2), 2);
  const Image img = random_image(16, 12, 5);
  Rng a(9), b(9);
  const auto pa = priors::estimate_priors(dbn, gdrn, img, 4, a);
  const auto pb = priors::estimate_priors(dbn, gdrn, img, 4, b);
  CHECK(pa.blur.values == pb.blur.values);
  CHECK(pa.distortion.values == pb.distortion.values);
  CHECK(pa.blur.height == 16);
  CHECK(pa.blur.width == 12);
  CHECK(pa.blur.max() > 0.0);
  CHECK(pa.blur.values != pa.distortion.values);
  for (double v : pa.blur.values) CHECK(v >= 0.0);
}

// ---- losses

TEST_CASE("gradient stencils equal direct evaluation") {
  const auto x = random_tensor<double>(1, 3, 5, 6, 3);
  for (auto kind : losses::kGradientKinds) {
    const auto g = losses::image_gradient(Var<double>(x), kind).value();
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 6; ++xx)
          CHECK(g.at(0, c, y, xx) == doctest::Approx(stencil_at(x, c, y, xx, losses::stencil(kind))).epsilon(1e-14));
  }
  // Linear ramp along x: central difference 1 inside, 0 at reflected borders; Laplacian 0 inside.
  Tensor<double> ramp(1, 1, 4, 5);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 5; ++xx) ramp.at(0, 0, y, xx) = xx;
  const auto gh = losses::grad_h(Var<double>(ramp)).value();
  const auto gv = losses::grad_v(Var<double>(ramp)).value();
  const auto lap = losses::laplacian(Var<double>(ramp)).value();
  CHECK(gh.at(0, 0, 2, 2) == 1.0);
  CHECK(gh.at(0, 0, 2, 0) == 0.0);
  CHECK(gv.at(0, 0, 1, 3) == 0.0);
  CHECK(lap.at(0, 0, 1, 2) == 0.0);
}

TEST_CASE("confidence-weighted term: 2x2 hand evaluation") {
  double total = 0;
  for (const auto& t : oracle::kConfidence2x2) {
    const auto v = confidence_weighted_l1(Var<double>(from_rows(1, 2, 2, t.conf)), Var<double>(from_rows(3, 2, 2, t.hat)),
                                          Var<double>(from_rows(3, 2, 2, t.ref)), 0.01, losses::kConfidenceEps)
                       .value()
                       .item();
    CHECK(std::abs(v - t.expected) <= 1e-9);
    total += v;
  }
  CHECK(std::abs(total - oracle::kConfidence2x2Total) <= 1e-9);
}

TEST_CASE("confidence term: C = 1 reduces to plain gradient L1 sum; lambda_c penalizes low confidence") {
  const auto hat = random_tensor<double>(1, 3, 4, 4, 1), ref = random_tensor<double>(1, 3, 4, 4, 2);
  Tensor<double> ones(1, 1, 4, 4, 1.0 - 1e-12);
  const double v = confidence_weighted_l1(Var<double>(ones), Var<double>(hat), Var<double>(ref), 0.0, 1e-6).value().item();
  double direct = 0;
  for (std::size_t i = 0; i < hat.size(); ++i) direct += std::abs(hat.data[i] - ref.data[i]);
  CHECK(v == doctest::Approx(direct / 16 * (1.0 - 1e-12)).epsilon(1e-12));
  Tensor<double> low(1, 1, 4, 4, 0.01);
  const double barrier = confidence_weighted_l1(Var<double>(low), Var<double>(ref), Var<double>(ref), 0.5, 1e-6).value().item();
  CHECK(barrier == doctest::Approx(-0.5 * std::log(0.01)).epsilon(1e-12));
}

TEST_CASE("l1 and perceptual losses") {
  const auto a = random_tensor<double>(1, 3, 16, 16, 1, 0, 1), b = random_tensor<double>(1, 3, 16, 16, 2, 0, 1);
  double l1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
  CHECK(losses::l1_loss(Var<double>(a), Var<double>(b)).value().item() == doctest::Approx(l1 / a.size()).epsilon(1e-12));
  const auto f = losses::FeatureExtractor<double>::desk();
  CHECK(losses::perceptual_loss(f, Var<double>(a), Var<double>(a)).value().item() == 0.0);
  CHECK(losses::perceptual_loss(f, Var<double>(a), Var<double>(b)).value().item() > 0.0);
  CHECK_THROWS_AS(losses::perceptual_loss(f, Var<double>(a), Var<double>(random_tensor<double>(1, 3, 8, 8, 3))), Error);
}

TEST_CASE("total_loss combines weighted terms and skips zero weights") {
  const auto clean = random_tensor<double>(1, 3, 16, 16, 1, 0, 1), hat = random_tensor<double>(1, 3, 16, 16, 2, 0, 1);
  const auto cbs = losses::ConfidenceBlocks<double>::init(3);
  const auto f = losses::FeatureExtractor<double>::desk();
  const losses::LossWeights w{0.01, 0.25, 0.1};
  const auto t = losses::total_loss(Var<double>(clean), Var<double>(hat), &cbs, &f, w);
  CHECK(t.lfinal == doctest::Approx(t.l1 + 0.25 * t.lg + 0.1 * t.lp).epsilon(1e-12));
  for (const auto& m : t.confidence_maps) CHECK(m.defined());
  const auto only_l1 = losses::total_loss<double>(Var<double>(clean), Var<double>(hat), nullptr, nullptr, {0.01, 0, 0});
  CHECK(only_l1.lfinal == doctest::Approx(t.l1).epsilon(1e-14));
  CHECK(only_l1.lg == 0.0);
  CHECK_THROWS_AS(losses::total_loss<double>(Var<double>(clean), Var<double>(hat), nullptr, &f, w), Error);
  CHECK_THROWS_AS((losses::LossWeights{-1, 0, 0}.validate()), Error);
}

TEST_CASE("L_final gradient w.r.t. the restored image and CB parameters (double)") {
  const auto f = losses::FeatureExtractor<double>::desk();
  const losses::LossWeights w{0.01, 0.25, 0.1};
  auto cbs = losses::ConfidenceBlocks<double>::init(11);
  const auto clean = random_tensor<double>(1, 3, 8, 8, 1, 0, 1);
  Tensor<double> hat0 = random_tensor<double>(1, 3, 8, 8, 2, 0, 1);
  Var<double> hat(hat0, true);
  auto loss = [&](const Var<double>& h) { return losses::total_loss(Var<double>(clean), h, &cbs, &f, w).total; };
  for (auto& n : cbs.nets) n.params().zero_grad();
  backward(loss(hat));

  Rng pick(3);
  const double h = 1e-6;
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = pick.uniform_int(static_cast<std::uint32_t>(hat0.size()));
    Tensor<double> up = hat0, dn = hat0;
    up.data[i] += h;
    dn.data[i] -= h;
    const double num = (loss(Var<double>(up)).value().item() - loss(Var<double>(dn)).value().item()) / (2 * h);
    const double ana = hat.grad().data[i];
    worst = std::max(worst, std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana)));
  }
  CHECK(worst <= 1e-4);

  worst = 0;
  for (int k = 0; k < 20; ++k) {
    auto& net = cbs.nets[pick.uniform_int(3)];
    auto& p = net.params().vars()[pick.uniform_int(static_cast<std::uint32_t>(net.params().size()))];
    const std::size_t i = pick.uniform_int(static_cast<std::uint32_t>(p.value().size()));
    const double ana = p.grad().data[i], orig = p.value().data[i];
    p.mutable_value().data[i] = orig + h;
    const double lu = loss(Var<double>(hat0)).value().item();
    p.mutable_value().data[i] = orig - h;
    const double ld = loss(Var<double>(hat0)).value().item();
    p.mutable_value().data[i] = orig;
    const double num = (lu - ld) / (2 * h);
    worst = std::max(worst, std::abs(num - ana) / std::max(1e-6, std::abs(num) + std::abs(ana)));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("feature extractor is frozen and seeded") {
  const auto a = losses::FeatureExtractor<float>::desk(), b = losses::FeatureExtractor<float>::desk();
  CHECK(a.network().params().hash() == b.network().params().hash());
  CHECK(losses::FeatureExtractor<float>::desk(1).network().params().hash() != a.network().params().hash());
  for (const auto& v : a.network().params().vars()) CHECK_FALSE(v.requires_grad());
}
