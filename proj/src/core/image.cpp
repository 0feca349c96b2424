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

#include "image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "error.hpp"
#include "rng.hpp"

namespace tdrn {

Image::Image(int height, int width, double fill) : height_(height), width_(width) {
  require(height >= kMinSide && width >= kMinSide,
          "image must be at least 8x8, got " + std::to_string(height) + "x" + std::to_string(width));
  data_.assign(static_cast<std::size_t>(kChannels) * height * width, fill);
}

void Image::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

std::uint8_t quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    fail(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + png.message);
  }
  const int h = static_cast<int>(png.height);
  const int w = static_cast<int>(png.width);
  if (h < Image::kMinSide || w < Image::kMinSide) {
    fail(ErrorCode::kIo, "PNG too small (" + std::to_string(w) + "x" + std::to_string(h) + "): " + path.string());
  }
  Image img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
  return img;
}

namespace {

void write_rgb8(const std::vector<std::uint8_t>& buf, int height, int width, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace

void write_png(const Image& img, const std::filesystem::path& path) {
  const int h = img.height();
  const int w = img.width();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] = quantize8(img.at(c, y, x));
  write_rgb8(buf, h, w, path);
}

void write_png_gray(std::span<const double> values, int height, int width, const std::filesystem::path& path) {
  require(values.size() == static_cast<std::size_t>(height) * width, "gray map size mismatch");
  std::vector<std::uint8_t> buf(values.size() * 3);
  for (std::size_t i = 0; i < values.size(); ++i) buf[i * 3] = buf[i * 3 + 1] = buf[i * 3 + 2] = quantize8(values[i]);
  write_rgb8(buf, height, width, path);
}

Image crop_resize_square(const Image& img, int size) {
  const int side = std::min(img.height(), img.width());
  const int y0 = (img.height() - side) / 2;
  const int x0 = (img.width() - side) / 2;
  Image out(size, size);
  const double scale = static_cast<double>(side) / size;
  for (int y = 0; y < size; ++y) {
    const double sy = std::clamp((y + 0.5) * scale - 0.5, 0.0, side - 1.0);
    const int iy = std::min(static_cast<int>(sy), side - 2 < 0 ? 0 : side - 2);
    const double fy = sy - iy;
    for (int x = 0; x < size; ++x) {
      const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, side - 1.0);
      const int ix = std::min(static_cast<int>(sx), side - 2);
      const double fx = sx - ix;
      for (int c = 0; c < 3; ++c) {
        const double a = img.at(c, y0 + iy, x0 + ix);
        const double b = img.at(c, y0 + iy, x0 + ix + 1);
        const double d = img.at(c, y0 + iy + 1, x0 + ix);
        const double e = img.at(c, y0 + iy + 1, x0 + ix + 1);
        out.at(c, y, x) = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
      }
    }
  }
  return out;
}

namespace {

using Rgb = std::array<double, 3>;

struct Ellipse {
  double cx, cy, rx, ry, angle;
  Rgb color;

  bool contains(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double u = (c * dx + s * dy) / rx;
    const double v = (-s * dx + c * dy) / ry;
    return u * u + v * v <= 1.0;
  }
};

Rgb jitter(Rgb base, Rng& rng, double amount) {
  for (double& v : base) v = std::clamp(v + rng.uniform(-amount, amount), 0.02, 0.98);
  return base;
}

}  // namespace

Image synth_face(int size, std::uint64_t seed) {
  Rng rng(seed);
  const Rgb bg_top = jitter({0.55, 0.65, 0.75}, rng, 0.25);
  const Rgb bg_bottom = jitter({0.35, 0.40, 0.45}, rng, 0.2);
  const Rgb skin = jitter({0.80, 0.62, 0.50}, rng, 0.12);
  const Rgb hair = jitter({0.20, 0.14, 0.10}, rng, 0.1);
  const Rgb iris = jitter({0.25, 0.30, 0.35}, rng, 0.15);
  const Rgb lips = jitter({0.70, 0.35, 0.35}, rng, 0.1);

  const double fx = 0.5 + rng.uniform(-0.04, 0.04);
  const double fy = 0.55 + rng.uniform(-0.03, 0.03);
  const double frx = rng.uniform(0.26, 0.32);
  const double fry = rng.uniform(0.33, 0.39);
  const double tilt = rng.uniform(-0.12, 0.12);
  const double eye_dx = rng.uniform(0.09, 0.12);
  const double eye_y = fy - rng.uniform(0.06, 0.10);
  const double mouth_y = fy + rng.uniform(0.17, 0.22);
  const double mouth_w = rng.uniform(0.07, 0.11);

  std::vector<Ellipse> shapes;
  shapes.push_back({fx, fy - 0.08, frx * 1.15, fry * 1.05, tilt, hair});
  shapes.push_back({fx, fy, frx, fry, tilt, skin});
  for (int side : {-1, 1}) {
    const double ex = fx + side * eye_dx;
    shapes.push_back({ex, eye_y - 0.055, 0.06, 0.012, tilt + side * 0.15, hair});
    shapes.push_back({ex, eye_y, 0.045, 0.022, tilt, {0.95, 0.95, 0.93}});
    shapes.push_back({ex, eye_y, 0.018, 0.018, 0.0, iris});
  }
  shapes.push_back({fx, fy + 0.06, 0.02, 0.055, tilt, {skin[0] * 0.8, skin[1] * 0.75, skin[2] * 0.75}});
  shapes.push_back({fx, mouth_y, mouth_w, 0.022, tilt, lips});

  // Low-amplitude texture so gradients are nonzero away from shape edges.
  std::array<std::array<double, 4>, 4> waves{};
  for (auto& w : waves) w = {rng.uniform(4.0, 14.0), rng.uniform(4.0, 14.0), rng.uniform(0.0, 6.28), rng.uniform(0.01, 0.03)};

  Image img(size, size);
  constexpr int kSub = 3;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb acc{0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double u = (x + (sx + 0.5) / kSub) / size;
          const double v = (y + (sy + 0.5) / kSub) / size;
          Rgb col;
          for (int c = 0; c < 3; ++c) col[c] = bg_top[c] * (1 - v) + bg_bottom[c] * v;
          for (const auto& e : shapes)
            if (e.contains(u, v)) col = e.color;
          if (shapes[1].contains(u, v)) {
            const double shade = 1.0 - 0.25 * (u - fx) / frx;
            for (double& cv : col) cv *= shade;
          }
          for (int c = 0; c < 3; ++c) acc[c] += col[c];
        }
      }
      double tex = 0.0;
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      for (const auto& w : waves) tex += w[3] * std::sin(6.28318530718 * (w[0] * u + w[1] * v) + w[2]);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(acc[c] / (kSub * kSub) + tex, 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace tdrn
