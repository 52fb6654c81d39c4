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

#include "calibfw/panorama.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "calibfw/parallel.hpp"

namespace calibfw {
namespace {

constexpr double kPi = std::numbers::pi;

struct Palette {
  Eigen::Vector3d upper;
  Eigen::Vector3d lower;
  std::array<Eigen::Vector3d, 3> upper_deco;
  std::array<Eigen::Vector3d, 3> lower_deco;
};

// Base colors of each style sum to 360 +/- d so that a 50/50 blend across the
// horizon sits exactly on kPaletteSumThreshold. Every upper color sums above
// the threshold and every lower color below it.
Palette palette_for(PanoramaStyle style) {
  if (style == PanoramaStyle::indoor_like) {
    return {{240, 220, 150},
            {70, 25, 15},
            {{{255, 250, 225}, {205, 195, 175}, {180, 200, 210}}},
            {{{130, 40, 35}, {45, 50, 100}, {110, 80, 40}}}};
  }
  return {{80, 185, 245},
          {35, 130, 45},
          {{{245, 245, 250}, {215, 225, 240}, {255, 235, 140}}},
          {{{20, 80, 30}, {95, 90, 70}, {30, 80, 140}}}};
}

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

struct Shape {
  bool ellipse = false;
  double lon_c = 0, lat_c = 0;
  double half_lon = 0, half_lat = 0;
  Eigen::Vector3d color;

  bool contains(double lon, double lat) const {
    const double dl = wrap_angle(lon - lon_c) / half_lon;
    const double dt = (lat - lat_c) / half_lat;
    if (ellipse) return dl * dl + dt * dt <= 1.0;
    return std::abs(dl) <= 1.0 && std::abs(dt) <= 1.0;
  }
};

// Shapes live in [margin, 85 deg] latitude (mirrored below), leaving a clean
// band of base color on each side of the horizon.
constexpr double kMarginRad = 3.0 * kPi / 180.0;
constexpr double kMaxLatRad = 85.0 * kPi / 180.0;

Shape random_shape(Rng& rng, bool ellipse, bool upper, double lat_lo_deg, double lat_hi_deg,
                   double lon_half_lo_deg, double lon_half_hi_deg, double lat_half_lo_deg,
                   double lat_half_hi_deg, const Eigen::Vector3d& color) {
  Shape s;
  s.ellipse = ellipse;
  s.color = color;
  s.lon_c = rng.uniform(-kPi, kPi);
  s.half_lon = deg_to_rad(rng.uniform(lon_half_lo_deg, lon_half_hi_deg));
  s.half_lat = deg_to_rad(rng.uniform(lat_half_lo_deg, lat_half_hi_deg));
  double center = deg_to_rad(rng.uniform(lat_lo_deg, lat_hi_deg));
  // Clip the vertical extent into the allowed band.
  center = std::clamp(center, kMarginRad + s.half_lat, kMaxLatRad - s.half_lat);
  if (s.half_lat * 2.0 > kMaxLatRad - kMarginRad) {
    s.half_lat = 0.5 * (kMaxLatRad - kMarginRad);
    center = 0.5 * (kMaxLatRad + kMarginRad);
  }
  s.lat_c = upper ? center : -center;
  return s;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

std::string to_string(PanoramaStyle style) {
  switch (style) {
    case PanoramaStyle::indoor_like:
      return "indoor-like";
    case PanoramaStyle::outdoor_like:
      return "outdoor-like";
    case PanoramaStyle::external:
      return "external";
  }
  return "external";
}

PanoramaStyle parse_style(std::string_view name) {
  if (name == "indoor-like" || name == "indoor") return PanoramaStyle::indoor_like;
  if (name == "outdoor-like" || name == "outdoor") return PanoramaStyle::outdoor_like;
  if (name == "external") return PanoramaStyle::external;
  throw std::invalid_argument("unknown panorama style '" + std::string(name) +
                              "' (expected indoor-like or outdoor-like)");
}

Panorama make_panorama(RgbImage image, std::string source_id, PanoramaStyle style) {
  if (image.width != 2 * image.height)
    throw std::invalid_argument("panorama " + source_id + " is " + std::to_string(image.width) +
                                "x" + std::to_string(image.height) +
                                ", equirectangular input must be 2:1");
  if (image.width < 64)
    throw std::invalid_argument("panorama " + source_id + " is narrower than 64 px");
  return {std::move(image), std::move(source_id), style};
}

Panorama load_panorama(const std::filesystem::path& path) {
  return make_panorama(read_png(path), path.stem().string(), PanoramaStyle::external);
}

Panorama synth_panorama(std::uint64_t seed, PanoramaStyle style, int height_px) {
  if (style == PanoramaStyle::external)
    throw std::invalid_argument("synth_panorama: style must be indoor-like or outdoor-like");
  if (height_px < 32) throw std::invalid_argument("synth_panorama: height must be >= 32");

  Rng rng(seed * 0x9E3779B97F4A7C15ull + (style == PanoramaStyle::indoor_like ? 1 : 2));
  Palette pal = palette_for(style);
  Eigen::Vector3d jitter;
  for (int c = 0; c < 3; ++c) jitter[c] = std::round(rng.uniform(-12.0, 12.0));
  pal.upper += jitter;
  pal.lower -= jitter;

  const bool indoor = style == PanoramaStyle::indoor_like;
  std::vector<Shape> shapes;
  if (indoor) {
    // Windows, doors and frames on the walls; rugs and furniture on the floor.
    for (int i = 0; i < 14; ++i)
      shapes.push_back(random_shape(rng, false, true, 5, 50, 3, 15, 3, 15,
                                    pal.upper_deco[rng.uniform_int(3)]));
    for (int i = 0; i < 8; ++i)
      shapes.push_back(random_shape(rng, false, false, 10, 70, 5, 25, 4, 12,
                                    pal.lower_deco[rng.uniform_int(3)]));
  } else {
    // Clouds and a sun above; trees, rocks and ponds below.
    for (int i = 0; i < 10; ++i)
      shapes.push_back(random_shape(rng, true, true, 10, 60, 5, 25, 3, 10,
                                    pal.upper_deco[rng.uniform_int(3)]));
    for (int i = 0; i < 14; ++i)
      shapes.push_back(random_shape(rng, true, false, 6, 40, 2, 10, 2, 8,
                                    pal.lower_deco[rng.uniform_int(3)]));
  }
  const double line_phase = rng.uniform(0.0, 2.0 * kPi);

  const int height = height_px;
  const int width = 2 * height_px;
  RgbImage img(width, height);
  for (int j = 0; j < height; ++j) {
    const double lat = (0.5 - (j + 0.5) / height) * kPi;
    const bool upper = lat > 0.0;
    const double alat = std::abs(lat);
    const double shade = 1.0 - 0.15 * std::max(0.0, alat - kMarginRad) / (kPi / 2 - kMarginRad);
    for (int i = 0; i < width; ++i) {
      const double lon = ((i + 0.5) / width - 0.5) * 2.0 * kPi;
      Eigen::Vector3d color = (upper ? pal.upper : pal.lower) * shade;
      if (alat >= kMarginRad) {
        const double lon_deg = rad_to_deg(wrap_angle(lon + line_phase));
        const double lat_deg = rad_to_deg(alat);
        if (indoor) {
          if (upper && lat_deg < 60.0 && std::abs(std::remainder(lon_deg, 30.0)) < 0.6)
            color *= 0.88;
          if (!upper && (std::abs(std::remainder(lon_deg, 15.0)) < 0.8 ||
                         std::abs(std::remainder(lat_deg, 15.0)) < 0.6))
            color *= 0.6;
        } else if (!upper && (std::abs(lat_deg - 10) < 0.5 || std::abs(lat_deg - 18) < 0.5 ||
                              std::abs(lat_deg - 30) < 0.5 || std::abs(lat_deg - 50) < 0.5)) {
          color *= 0.7;
        }
        for (const auto& s : shapes)
          if (s.contains(lon, lat)) color = s.color;
      }
      img.set(i, j, {to_u8(color[0]), to_u8(color[1]), to_u8(color[2])});
    }
  }
  return {std::move(img), to_string(style) + "-" + std::to_string(seed), style};
}

bool in_upper_palette(const std::uint8_t* rgb) {
  return int(rgb[0]) + int(rgb[1]) + int(rgb[2]) > kPaletteSumThreshold;
}

Eigen::Vector2d equirect_coords(int width, int height, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d d = dir.normalized();
  const double lon = std::atan2(d.x(), d.z());
  const double lat = std::asin(std::clamp(d.y(), -1.0, 1.0));
  return {(lon / (2.0 * kPi) + 0.5) * width, (0.5 - lat / kPi) * height};
}

Eigen::Vector3d equirect_lookup(const Panorama& pano, const Eigen::Vector3d& dir) {
  const int w = pano.width(), h = pano.height();
  const Eigen::Vector2d uv = equirect_coords(w, h, dir);
  // Sample positions relative to pixel centers.
  const double x = uv.x() - 0.5, y = uv.y() - 0.5;
  const double fx0 = std::floor(x), fy0 = std::floor(y);
  const double ax = x - fx0, ay = y - fy0;
  const int x0 = ((static_cast<int>(fx0) % w) + w) % w;
  const int x1 = (x0 + 1) % w;
  const int y0 = std::clamp(static_cast<int>(fy0), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(fy0) + 1, 0, h - 1);

  auto px = [&](int i, int j) {
    const auto* p = pano.image.at(i, j);
    return Eigen::Vector3d(p[0], p[1], p[2]);
  };
  return (1 - ay) * ((1 - ax) * px(x0, y0) + ax * px(x1, y0)) +
         ay * ((1 - ax) * px(x0, y1) + ax * px(x1, y1));
}

CropSpec make_crop_spec(double f_px, double pitch_deg, double roll_deg, double yaw_deg,
                        int size_px) {
  if (size_px < 2) throw std::invalid_argument("crop size must be >= 2");
  if (!(f_px >= kFocalMinPx && f_px <= kFocalMaxPx))
    throw std::invalid_argument("focal " + std::to_string(f_px) + " px outside [50, 500]");
  if (!(pitch_deg > -kPitchMaxAbsDeg && pitch_deg <= 0.0))
    throw std::invalid_argument("pitch " + std::to_string(pitch_deg) + " deg outside (-90, 0]");
  if (!(std::abs(roll_deg) <= kRollMaxAbsDeg))
    throw std::invalid_argument("roll " + std::to_string(roll_deg) + " deg outside [-45, 45]");
  if (!(yaw_deg >= 0.0 && yaw_deg < 360.0))
    throw std::invalid_argument("yaw " + std::to_string(yaw_deg) + " deg outside [0, 360)");
  CropSpec spec;
  spec.intr = {f_px, size_px, size_px};
  spec.ext = {deg_to_rad(pitch_deg), deg_to_rad(roll_deg), deg_to_rad(yaw_deg)};
  return spec;
}

Eigen::Vector3d pixel_direction(const CropSpec& spec, double u, double v) {
  const Eigen::Vector2d c = spec.intr.principal_point();
  const Eigen::Vector3d ray((u - c.x()) / spec.intr.f_px, -(v - c.y()) / spec.intr.f_px, 1.0);
  return rotation_matrix(spec.ext).transpose() * ray.normalized();
}

RgbImage render_crop(const Panorama& pano, const CropSpec& spec, int workers) {
  const int w = spec.intr.width_px, h = spec.intr.height_px;
  RgbImage out(w, h);
  parallel_for(std::size_t(h), workers, [&](std::size_t row) {
    const int j = static_cast<int>(row);
    for (int i = 0; i < w; ++i) {
      const Eigen::Vector3d c = equirect_lookup(pano, pixel_direction(spec, i + 0.5, j + 0.5));
      out.set(i, j, {to_u8(c[0]), to_u8(c[1]), to_u8(c[2])});
    }
  });
  return out;
}

void SamplerConfig::validate() const {
  auto check = [](const ValueRange& r, double lo, double hi, const char* name) {
    if (!(r.lo <= r.hi))
      throw std::invalid_argument(std::string("sampler ") + name + " range is empty");
    if (r.lo < lo || r.hi > hi)
      throw std::invalid_argument(std::string("sampler ") + name + " range [" +
                                  std::to_string(r.lo) + ", " + std::to_string(r.hi) +
                                  "] leaves [" + std::to_string(lo) + ", " +
                                  std::to_string(hi) + "]");
  };
  check(focal_px, kFocalMinPx, kFocalMaxPx, "focal_px");
  check(pitch_deg, -kPitchMaxAbsDeg, 0.0, "pitch_deg");
  check(roll_deg, -kRollMaxAbsDeg, kRollMaxAbsDeg, "roll_deg");
  if (output_size < 2) throw std::invalid_argument("sampler output_size must be >= 2");
  if (crops_per_panorama < 1) throw std::invalid_argument("crops_per_panorama must be >= 1");
}

CropSpec sample_params(Rng& rng, const SamplerConfig& cfg) {
  const double f = rng.uniform(cfg.focal_px.lo, cfg.focal_px.hi);
  // Half-open towards the lower end so that -90 deg is never produced.
  const double pitch = cfg.pitch_deg.hi - (cfg.pitch_deg.hi - cfg.pitch_deg.lo) * rng.uniform();
  const double roll = rng.uniform(cfg.roll_deg.lo, cfg.roll_deg.hi);
  const double yaw = rng.uniform(0.0, 360.0);
  CropSpec spec;
  spec.intr = {f, cfg.output_size, cfg.output_size};
  spec.ext = {deg_to_rad(pitch), deg_to_rad(roll), deg_to_rad(yaw)};
  return spec;
}

double measure_horizon_row(const RgbImage& crop) {
  double total = 0.0;
  int columns = 0;
  for (int i = 0; i < crop.width; ++i) {
    auto excess = [&](int j) {
      const auto* p = crop.at(i, j);
      return double(int(p[0]) + int(p[1]) + int(p[2]) - kPaletteSumThreshold);
    };
    for (int j = 1; j < crop.height; ++j) {
      const double above = excess(j - 1), below = excess(j);
      if (above > 0.0 && below <= 0.0) {
        // Linear crossing between the centers of rows j-1 and j.
        total += (j - 0.5) + above / (above - below);
        ++columns;
        break;
      }
    }
  }
  if (columns == 0) throw HorizonNotInFrame();
  return total / columns;
}

}  // namespace calibfw
