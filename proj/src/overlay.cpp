// Copyright 2026 The calibfw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "calibfw/overlay.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace calibfw {

namespace {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
};

const Glyph* find_glyph(char c) {
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.c == c) return &g;
  return nullptr;
}

void fill_rect(RgbImage& img, int x0, int y0, int w, int h, const Rgb8& color) {
  for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x) img.set(x, y, color);
}

void draw_line(RgbImage& img, const HorizonParams& p, int src_w, int src_h, int scale,
               double thickness, const Rgb8& color) {
  const auto [a, b] = horizon_endpoints(p.f_px, deg_to_rad(p.pitch_deg), deg_to_rad(p.roll_deg),
                                        src_w, src_h);
  const double ax = a.x() * scale, ay = a.y() * scale;
  const double dx = (b.x() - a.x()) * scale, dy = (b.y() - a.y()) * scale;
  const double len = std::hypot(dx, dy);
  const double half = thickness / 2.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double px = x + 0.5 - ax, py = y + 0.5 - ay;
      if (std::abs(px * dy - py * dx) / len <= half) img.set(x, y, color);
    }
  }
}

}  // namespace

HorizonParams HorizonParams::from_target(const CalibrationTarget& t) {
  const auto raw = denormalize_target(t);
  return {raw.f_px, rad_to_deg(raw.pitch_rad), rad_to_deg(raw.roll_rad)};
}

double horizon_center_row(const HorizonParams& p, int height_px) {
  const double bp = horizon_midpoint(p.f_px, deg_to_rad(p.pitch_deg), height_px);
  return image_units_to_row(bp / std::cos(deg_to_rad(p.roll_deg)), height_px);
}

void draw_text(RgbImage& img, int x, int y, std::string_view text, const Rgb8& color, int size) {
  for (char c : text) {
    if (const Glyph* g = find_glyph(c)) {
      for (int r = 0; r < 7; ++r)
        for (int col = 0; col < 5; ++col)
          if (g->rows[std::size_t(r)] & (0x10 >> col)) fill_rect(img, x + col * size, y + r * size, size, size, color);
    }
    x += 6 * size;
  }
}

RgbImage draw_horizon(const RgbImage& img, const std::optional<HorizonParams>& truth,
                      const HorizonParams& pred, const OverlayOptions& options) {
  if (img.width < 2 || img.height < 2) throw std::invalid_argument("draw_horizon: image too small");
  if (options.scale < 1) throw std::invalid_argument("draw_horizon: scale must be >= 1");
  const int s = options.scale;
  RgbImage out(img.width * s, img.height * s);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.set(x, y, img.get(x / s, y / s));
  if (truth) draw_line(out, *truth, img.width, img.height, s, options.thickness, options.truth_color);
  draw_line(out, pred, img.width, img.height, s, options.thickness, options.pred_color);
  if (options.legend) {
    const int rows = truth ? 2 : 1;
    fill_rect(out, 2, 2, 46, 4 + 10 * rows, Rgb8{0, 0, 0});
    int y = 5;
    if (truth) {
      fill_rect(out, 5, y, 7, 7, options.truth_color);
      draw_text(out, 15, y, "GT", Rgb8{255, 255, 255});
      y += 10;
    }
    fill_rect(out, 5, y, 7, 7, options.pred_color);
    draw_text(out, 15, y, "PRED", Rgb8{255, 255, 255});
  }
  return out;
}

}  // namespace calibfw
