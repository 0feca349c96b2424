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

#include "turbsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "error.hpp"
#include "log.hpp"

namespace tdrn::turbsim {

namespace {

void check_odd_size(int size, int min_size) {
  require(size >= min_size && size % 2 == 1,
          "kernel size must be odd and >= " + std::to_string(min_size) + ", got " + std::to_string(size));
}

void normalize(std::vector<double>& w) {
  double sum = 0.0;
  for (double v : w) sum += v;
  require(sum > 0.0, "kernel has zero mass");
  for (double& v : w) v /= sum;
}

inline int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

BlurKernel::BlurKernel(int size, std::vector<double> weights) : size_(size), weights_(std::move(weights)) {
  check_odd_size(size, 1);
  require(weights_.size() == static_cast<std::size_t>(size) * size, "kernel weight count does not match size");
  double sum = 0.0;
  for (double v : weights_) {
    require(std::isfinite(v) && v >= 0.0, "kernel weights must be finite and nonnegative");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-6, "kernel weights must sum to 1");
}

BlurKernel BlurKernel::identity() { return BlurKernel(1, {1.0}); }

int BlurKernel::support_count() const {
  return static_cast<int>(std::count_if(weights_.begin(), weights_.end(), [](double v) { return v > 0.0; }));
}

std::string to_string(BlurKind kind) {
  switch (kind) {
    case BlurKind::kIdentity: return "identity";
    case BlurKind::kGaussian: return "gaussian";
    case BlurKind::kMotion: return "motion";
  }
  return "identity";
}

BlurKind blur_kind_from_string(const std::string& s) {
  if (s == "identity") return BlurKind::kIdentity;
  if (s == "gaussian") return BlurKind::kGaussian;
  if (s == "motion") return BlurKind::kMotion;
  fail(ErrorCode::kInvalidArgument, "unknown blur kind '" + s + "'");
}

void DegradationConfig::validate() const {
  require(sigma > 0.0, "degrade.sigma must be > 0");
  require(eta >= 0.0, "degrade.eta must be >= 0");
  require(patch_count >= 0, "degrade.patch_count must be >= 0");
  require(iterations >= 0, "degrade.M must be >= 0");
  require(noise_std >= 0.0, "degrade.noise_std must be >= 0");
  switch (blur.kind) {
    case BlurKind::kIdentity: break;
    case BlurKind::kGaussian:
      check_odd_size(blur.size, 3);
      require(blur.sigma_x > 0.0 && blur.sigma_y > 0.0, "gaussian sigmas must be > 0");
      break;
    case BlurKind::kMotion: check_odd_size(blur.size, 3); break;
  }
}

double DeformationField::rms() const {
  if (dx.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) acc += dx[i] * dx[i] + dy[i] * dy[i];
  return std::sqrt(acc / static_cast<double>(dx.size()));
}

BlurKernel gen_gaussian_kernel(int size, double sigma_x, double sigma_y, double theta) {
  check_odd_size(size, 3);
  require(sigma_x > 0.0 && sigma_y > 0.0, "gaussian sigmas must be > 0");
  const int c = size / 2;
  const double ct = std::cos(theta), st = std::sin(theta);
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - c, dy = y - c;
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      w[static_cast<std::size_t>(y) * size + x] =
          std::exp(-0.5 * (u * u / (sigma_x * sigma_x) + v * v / (sigma_y * sigma_y)));
    }
  }
  normalize(w);
  return BlurKernel(size, std::move(w));
}

// Mirrored line-for-line by tests/oracles/motion_kernel_ref.py; keep the
// order of random draws and arithmetic in sync with it.
BlurKernel gen_motion_kernel(int size, Rng& rng) {
  check_odd_size(size, 3);
  constexpr int kSteps = 1000;
  const double expl = 0.1 * rng.uniform();
  const double centripetal = 0.7 * rng.uniform();
  const double big_shake = 0.2 * rng.uniform();
  const double gauss_shake = 10.0 * rng.uniform();
  const double angle = 2.0 * std::numbers::pi * rng.uniform();
  const double max_len = (size - 1) * rng.uniform(0.6, 1.4);
  const double step = max_len / (kSteps - 1);

  std::vector<double> px(kSteps, 0.0), py(kSteps, 0.0);
  double vx = std::cos(angle) * step;
  double vy = std::sin(angle) * step;
  for (int t = 0; t < kSteps - 1; ++t) {
    double nx = 0.0, ny = 0.0;
    if (rng.uniform() < big_shake * expl) {
      const double phi = std::numbers::pi + (rng.uniform() - 0.5);
      const double c = std::cos(phi), s = std::sin(phi);
      nx = 2.0 * (vx * c - vy * s);
      ny = 2.0 * (vx * s + vy * c);
    }
    const double gx = rng.normal();
    const double gy = rng.normal();
    vx += nx + expl * (gauss_shake * gx - centripetal * px[t]) * step;
    vy += ny + expl * (gauss_shake * gy - centripetal * py[t]) * step;
    const double norm = std::sqrt(vx * vx + vy * vy);
    vx = vx / norm * step;
    vy = vy / norm * step;
    px[t + 1] = px[t] + vx;
    py[t + 1] = py[t] + vy;
  }

  const auto [minx, maxx] = std::minmax_element(px.begin(), px.end());
  const auto [miny, maxy] = std::minmax_element(py.begin(), py.end());
  const double extent = std::max(*maxx - *minx, *maxy - *miny);
  const double limit = size - 1.0;
  const double scale = extent > limit ? limit / extent : 1.0;
  const double cx = (*minx + *maxx) / 2.0;
  const double cy = (*miny + *maxy) / 2.0;
  const double half = (size - 1) / 2.0;

  std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
  for (int t = 0; t < kSteps; ++t) {
    const double x = std::clamp((px[t] - cx) * scale + half, 0.0, limit);
    const double y = std::clamp((py[t] - cy) * scale + half, 0.0, limit);
    const int ix = std::min(static_cast<int>(std::floor(x)), size - 2);
    const int iy = std::min(static_cast<int>(std::floor(y)), size - 2);
    const double fx = x - ix, fy = y - iy;
    w[static_cast<std::size_t>(iy) * size + ix] += (1 - fx) * (1 - fy);
    w[static_cast<std::size_t>(iy) * size + ix + 1] += fx * (1 - fy);
    w[static_cast<std::size_t>(iy + 1) * size + ix] += (1 - fx) * fy;
    w[static_cast<std::size_t>(iy + 1) * size + ix + 1] += fx * fy;
  }
  normalize(w);
  return BlurKernel(size, std::move(w));
}

BlurKernel make_kernel(const BlurSpec& spec, std::uint64_t kernel_seed) {
  switch (spec.kind) {
    case BlurKind::kIdentity: return BlurKernel::identity();
    case BlurKind::kGaussian: return gen_gaussian_kernel(spec.size, spec.sigma_x, spec.sigma_y, spec.theta);
    case BlurKind::kMotion: {
      Rng rng(kernel_seed);
      return gen_motion_kernel(spec.size, rng);
    }
  }
  return BlurKernel::identity();
}

Image apply_blur(const Image& img, const BlurKernel& k) {
  const int ks = k.size();
  require(ks <= img.height() && ks <= img.width(),
          "blur kernel (" + std::to_string(ks) + ") larger than image " + std::to_string(img.height()) + "x" +
              std::to_string(img.width()));
  struct Tap {
    int dy, dx;
    double w;
  };
  const int c = ks / 2;
  std::vector<Tap> taps;
  for (int y = 0; y < ks; ++y)
    for (int x = 0; x < ks; ++x)
      if (k.at(y, x) != 0.0) taps.push_back({y - c, x - c, k.at(y, x)});

  const int h = img.height(), w = img.width();
  Image out(h, w);
  for (int ch = 0; ch < Image::kChannels; ++ch) {
    const auto src = img.plane(ch);
    auto dst = out.plane(ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        // Convolution: kernel offset (dy, dx) reads the source at (y - dy, x - dx).
        for (const Tap& t : taps)
          acc += t.w * src[static_cast<std::size_t>(reflect101(y - t.dy, h)) * w + reflect101(x - t.dx, w)];
        dst[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
  }
  return out;
}

DeformationField gen_deformation_field(int height, int width, const DegradationConfig& cfg, Rng& rng) {
  require(height >= Image::kMinSide && width >= Image::kMinSide, "deformation field must be at least 8x8");
  cfg.validate();
  DeformationField field(height, width);
  if (cfg.iterations == 0 || cfg.patch_count == 0) return field;

  const int radius = static_cast<int>(std::ceil(2.0 * cfg.sigma));
  const int span = 2 * radius + 1;
  const double r2max = 4.0 * cfg.sigma * cfg.sigma;
  std::vector<double> envelope(static_cast<std::size_t>(span) * span, 0.0);
  for (int y = -radius; y <= radius; ++y)
    for (int x = -radius; x <= radius; ++x) {
      const double r2 = static_cast<double>(x * x + y * y);
      if (r2 <= r2max)
        envelope[static_cast<std::size_t>(y + radius) * span + x + radius] =
            std::exp(-r2 / (2.0 * cfg.sigma * cfg.sigma));
    }

  for (int m = 0; m < cfg.iterations; ++m) {
    for (int n = 0; n < cfg.patch_count; ++n) {
      const int cx = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(width)));
      const int cy = static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(height)));
      const double ax = cfg.eta * rng.normal();
      const double ay = cfg.eta * rng.normal();
      const int y0 = std::max(0, cy - radius), y1 = std::min(height - 1, cy + radius);
      const int x0 = std::max(0, cx - radius), x1 = std::min(width - 1, cx + radius);
      for (int y = y0; y <= y1; ++y) {
        const double* env = &envelope[static_cast<std::size_t>(y - cy + radius) * span + (x0 - cx + radius)];
        double* fx = &field.dx[static_cast<std::size_t>(y) * width + x0];
        double* fy = &field.dy[static_cast<std::size_t>(y) * width + x0];
        for (int x = 0; x <= x1 - x0; ++x) {
          fx[x] += ax * env[x];
          fy[x] += ay * env[x];
        }
      }
    }
  }
  return field;
}

Image warp(const Image& img, const DeformationField& field) {
  require(field.height == img.height() && field.width == img.width(), "deformation field shape does not match image");
  const int h = img.height(), w = img.width();
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const double sx = std::clamp(x + field.dx[p], 0.0, w - 1.0);
      const double sy = std::clamp(y + field.dy[p], 0.0, h - 1.0);
      const int ix = std::min(static_cast<int>(sx), w - 2);
      const int iy = std::min(static_cast<int>(sy), h - 2);
      const double fx = sx - ix, fy = sy - iy;
      for (int c = 0; c < Image::kChannels; ++c) {
        const double a = img.at(c, iy, ix), b = img.at(c, iy, ix + 1);
        const double d = img.at(c, iy + 1, ix), e = img.at(c, iy + 1, ix + 1);
        out.at(c, y, x) = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
      }
    }
  }
  return out;
}

Degraded degrade(const Image& img, const DegradationConfig& cfg) {
  cfg.validate();
  DegradationRecord rec;
  rec.blur = cfg.blur;
  rec.iterations = cfg.iterations;
  rec.seed = cfg.seed;
  rec.kernel_seed = derive_seed(cfg.seed, 0);
  rec.field_seed = derive_seed(cfg.seed, 1);
  rec.noise_seed = derive_seed(cfg.seed, 2);

  Image out = cfg.blur.kind == BlurKind::kIdentity ? img : apply_blur(img, make_kernel(cfg.blur, rec.kernel_seed));
  if (cfg.iterations > 0 && cfg.patch_count > 0) {
    Rng field_rng(rec.field_seed);
    out = warp(out, gen_deformation_field(img.height(), img.width(), cfg, field_rng));
  }
  if (cfg.noise_std > 0.0) {
    Rng noise_rng(rec.noise_seed);
    for (double& v : out.data()) v += cfg.noise_std * noise_rng.normal();
  }
  out.clamp01();
  return {std::move(out), rec};
}

std::vector<BlurSpec> gaussian_kernel_bank(std::uint64_t seed) {
  Rng rng(seed);
  auto size_for = [](double s) {
    const int half = static_cast<int>(std::ceil(3.0 * s));
    return std::min(2 * half + 1, 25);
  };
  std::vector<BlurSpec> bank;
  for (int i = 0; i < 8; ++i) {
    const double s = rng.uniform(1.0, 4.0);
    bank.push_back(BlurSpec::gaussian(size_for(s), s, s, 0.0));
  }
  for (int i = 0; i < 8; ++i) {
    const double sx = rng.uniform(1.0, 4.0);
    const double sy = rng.uniform(1.0, 4.0);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    bank.push_back(BlurSpec::gaussian(size_for(std::max(sx, sy)), sx, sy, theta));
  }
  return bank;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json kernel_params_json(const BlurSpec& b) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  switch (b.kind) {
    case BlurKind::kIdentity: break;
    case BlurKind::kGaussian:
      j["size"] = b.size;
      j["sigma_x"] = b.sigma_x;
      j["sigma_y"] = b.sigma_y;
      j["theta"] = b.theta;
      break;
    case BlurKind::kMotion: j["size"] = b.size; break;
  }
  return j;
}

}  // namespace

std::string manifest_line(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["distorted_path"] = r.distorted_path;
  j["clean_path"] = r.clean_path;
  j["blur_kind"] = to_string(r.blur.kind);
  j["kernel_params"] = kernel_params_json(r.blur);
  j["M"] = r.iterations;
  j["seed"] = r.seed;
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    ManifestRecord r;
    r.distorted_path = j.at("distorted_path").get<std::string>();
    r.clean_path = j.at("clean_path").get<std::string>();
    r.blur.kind = blur_kind_from_string(j.at("blur_kind").get<std::string>());
    const auto& kp = j.at("kernel_params");
    if (r.blur.kind != BlurKind::kIdentity) r.blur.size = kp.at("size").get<int>();
    if (r.blur.kind == BlurKind::kGaussian) {
      r.blur.sigma_x = kp.at("sigma_x").get<double>();
      r.blur.sigma_y = kp.at("sigma_y").get<double>();
      r.blur.theta = kp.at("theta").get<double>();
    }
    r.iterations = j.at("M").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("bad manifest record: ") + e.what());
  }
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write manifest " + path.string());
  for (const auto& r : m.records) out << manifest_line(r) << '\n';
  if (!out) fail(ErrorCode::kIo, "failed writing manifest " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    m.records.push_back(parse_manifest_line(line));
  }
  return m;
}

Manifest generate_dataset(const std::filesystem::path& clean_dir, const std::vector<DegradationConfig>& grid,
                          const std::filesystem::path& out_dir, const DatasetOptions& opts) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(clean_dir)) fail(ErrorCode::kNotFound, "clean image directory not found: " + clean_dir.string());
  require(!grid.empty(), "degradation grid is empty");
  require(opts.image_size >= Image::kMinSide, "image_size must be >= 8");
  for (const auto& cfg : grid) cfg.validate();

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(clean_dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::kNotFound, "no images in " + clean_dir.string());

  Manifest manifest;
  manifest.root = out_dir;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image clean;
    try {
      clean = crop_resize_square(read_png(files[i]), opts.image_size);
    } catch (const Error& e) {
      log::warn("skipping " + files[i].string() + ": " + e.what());
      continue;
    }
    const std::string stem = files[i].stem().string();
    const std::string clean_rel = "clean/" + stem + ".png";
    write_png(clean, out_dir / clean_rel);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      DegradationConfig cfg = grid[j];
      cfg.seed = derive_seed(opts.master_seed, i * grid.size() + j);
      const Degraded d = degrade(clean, cfg);
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "_c%03zu.png", j);
      const std::string distorted_rel = opts.distorted_dir + "/" + stem + suffix;
      write_png(d.image, out_dir / distorted_rel);
      manifest.records.push_back({distorted_rel, clean_rel, cfg.blur, cfg.iterations, cfg.seed});
    }
  }
  if (manifest.records.empty()) fail(ErrorCode::kNotFound, "no readable images in " + clean_dir.string());
  write_manifest(manifest, out_dir / opts.manifest_name);
  return manifest;
}

}  // namespace tdrn::turbsim
