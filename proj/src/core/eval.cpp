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

#include "eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "log.hpp"

namespace tdrn::eval {

double mse(const Image& a, const Image& b) {
  require(a.same_shape(b), "metric: shape mismatch");
  require(!a.empty(), "metric: empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

std::vector<double> luminance(const Image& img) {
  std::vector<double> y(img.plane_size());
  const auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

namespace {

/// Valid-mode separable filtering of an h x w plane with a normalized 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  require(a.same_shape(b), "ssim: shape mismatch");
  require(p.window >= 1 && p.window % 2 == 1 && p.sigma > 0, "ssim: window must be odd and sigma positive");
  require(a.height() >= p.window && a.width() >= p.window,
          "ssim needs images of at least " + std::to_string(p.window) + "x" + std::to_string(p.window));
  std::vector<double> k(p.window);
  const int r = p.window / 2;
  for (int i = 0; i < p.window; ++i) k[i] = std::exp(-0.5 * (i - r) * (i - r) / (p.sigma * p.sigma));
  const double ks = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= ks;

  const int h = a.height(), w = a.width();
  const auto ya = luminance(a), yb = luminance(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto mu_a = filter_valid(ya, h, w, k), mu_b = filter_valid(yb, h, w, k);
  const auto e_aa = filter_valid(aa, h, w, k), e_bb = filter_valid(bb, h, w, k), e_ab = filter_valid(ab, h, w, k);
  const double c1 = (p.k1 * 1.0) * (p.k1 * 1.0), c2 = (p.k2 * 1.0) * (p.k2 * 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    sum += num / den;
  }
  return sum / static_cast<double>(mu_a.size());
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "embedding dimensions differ (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::map<int, double> top_k_accuracy(const std::vector<LabeledEmbedding>& probes,
                                     const std::vector<LabeledEmbedding>& gallery, const std::vector<int>& ks) {
  require(!gallery.empty(), "top_k_accuracy: empty gallery");
  require(!probes.empty(), "top_k_accuracy: no probes");
  for (int k : ks) require(k >= 1, "top_k_accuracy: k must be >= 1");
  const std::size_t dim = gallery.front().embedding.size();
  for (const auto& g : gallery) require(g.embedding.size() == dim, "gallery embeddings differ in dimension");

  std::map<int, double> hits;
  for (int k : ks) hits[k] = 0.0;
  std::vector<std::size_t> order(gallery.size());
  std::vector<double> sim(gallery.size());
  for (const auto& probe : probes) {
    for (std::size_t g = 0; g < gallery.size(); ++g) sim[g] = cosine_similarity(probe.embedding, gallery[g].embedding);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sim[x] > sim[y]; });
    // Rank of the first gallery entry carrying the probe's label.
    std::size_t rank = gallery.size();
    for (std::size_t r = 0; r < order.size(); ++r)
      if (gallery[order[r]].label == probe.label) {
        rank = r;
        break;
      }
    for (auto& [k, h] : hits)
      if (rank < static_cast<std::size_t>(k)) h += 1.0;
  }
  for (auto& [k, h] : hits) h /= static_cast<double>(probes.size());
  return hits;
}

namespace {
double column_mean(const std::vector<MetricRow>& rows, double MetricRow::*field) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.*field;
  return s / static_cast<double>(rows.size());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace

double MetricReport::mean_psnr() const { return column_mean(rows, &MetricRow::psnr); }
double MetricReport::mean_ssim() const { return column_mean(rows, &MetricRow::ssim); }
double MetricReport::mean_dvgg() const { return column_mean(rows, &MetricRow::dvgg); }

bool MetricReport::has(const std::string& metric) const {
  return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
}

std::string MetricReport::table() const {
  std::size_t idw = 5;
  for (const auto& r : rows) idw = std::max(idw, r.id.size());
  auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(n, s.size()), ' ');
    return s;
  };
  auto line = [&](const std::string& id, double p, double s, double d) {
    std::string out = pad(id, idw);
    if (has("psnr")) out += "  " + pad(fmt("%.4f", p), 9);
    if (has("ssim")) out += "  " + pad(fmt("%.6f", s), 9);
    if (has("dvgg")) out += "  " + fmt("%.6f", d);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out;
  out += "# dataset: " + dataset + "\n";
  out += "# checkpoints: " + checkpoints + "\n";
  out += "# config_checksum: " + config_checksum + "\n";
  std::string head = pad("image", idw);
  if (has("psnr")) head += "  " + pad("psnr", 9);
  if (has("ssim")) head += "  " + pad("ssim", 9);
  if (has("dvgg")) head += "  dvgg";
  while (!head.empty() && head.back() == ' ') head.pop_back();
  out += head + "\n";
  for (const auto& r : rows) out += line(r.id, r.psnr, r.ssim, r.dvgg);
  out += line("mean", mean_psnr(), mean_ssim(), mean_dvgg());
  for (const auto& [k, acc] : top_k) out += "# top-" + std::to_string(k) + " accuracy: " + fmt("%.6f", acc) + "\n";
  out += "# rows: " + std::to_string(rows.size()) + ", skipped: " + std::to_string(skipped) + "\n";
  return out;
}

std::string MetricReport::json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["checkpoints"] = checkpoints;
  j["config_checksum"] = config_checksum;
  j["metrics"] = metrics;
  auto fields = [&](const std::string& id, double p, double s, double d) {
    nlohmann::ordered_json o;
    if (!id.empty()) o["id"] = id;
    if (has("psnr")) o["psnr"] = p;
    if (has("ssim")) o["ssim"] = s;
    if (has("dvgg")) o["dvgg"] = d;
    return o;
  };
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) j["rows"].push_back(fields(r.id, r.psnr, r.ssim, r.dvgg));
  j["mean"] = fields("", mean_psnr(), mean_ssim(), mean_dvgg());
  nlohmann::ordered_json tk = nlohmann::ordered_json::object();
  for (const auto& [k, acc] : top_k) tk[std::to_string(k)] = acc;
  j["top_k"] = tk;
  j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto put = [](const std::filesystem::path& p, const std::string& s) {
    std::FILE* f = std::fopen(p.c_str(), "wb");
    if (!f) fail(ErrorCode::kIo, "cannot write " + p.string());
    const bool ok = std::fwrite(s.data(), 1, s.size(), f) == s.size();
    if (std::fclose(f) != 0 || !ok) fail(ErrorCode::kIo, "failed writing " + p.string());
  };
  put(path, report.table());
  put(path.string() + ".json", report.json());
}

MetricReport evaluate_dataset(const turbsim::Manifest& manifest, const RestoreFn& restore,
                              const losses::FeatureExtractor<float>& features, const EvalOptions& opts) {
  for (const auto& m : opts.metrics)
    require(std::find(kAllMetrics.begin(), kAllMetrics.end(), m) != kAllMetrics.end(), "unknown metric '" + m + "'");
  MetricReport report;
  report.metrics = opts.metrics;
  std::vector<LabeledEmbedding> probes, gallery;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    Image distorted, clean;
    try {
      distorted = read_png(manifest.distorted(i));
      clean = read_png(manifest.clean(i));
    } catch (const Error& e) {
      log::warn("skipping record " + std::to_string(i) + ": " + e.what());
      ++report.skipped;
      continue;
    }
    const Image restored = restore(distorted, i);
    require(restored.same_shape(clean), "restored image for " + rec.distorted_path +
                                            " does not match its clean reference in size");
    MetricRow row{rec.distorted_path};
    if (report.has("psnr")) row.psnr = psnr(restored, clean);
    if (report.has("ssim")) row.ssim = ssim(restored, clean);
    if (report.has("dvgg")) row.dvgg = feature_distance(features, restored, clean);
    report.rows.push_back(row);
    if (!opts.ks.empty()) {
      probes.push_back({rec.clean_path, embed(features, restored)});
      const bool known = std::any_of(gallery.begin(), gallery.end(),
                                     [&](const LabeledEmbedding& g) { return g.label == rec.clean_path; });
      if (!known) gallery.push_back({rec.clean_path, embed(features, clean)});
    }
  }
  if (report.rows.empty()) fail(ErrorCode::kNotFound, "no manifest record could be evaluated");
  if (!opts.ks.empty()) report.top_k = top_k_accuracy(probes, gallery, opts.ks);
  return report;
}

}  // namespace tdrn::eval
