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

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "calibfw/camera_geometry.hpp"
#include "calibfw/image.hpp"
#include "calibfw/rng.hpp"

namespace calibfw {

enum class PanoramaStyle { indoor_like, outdoor_like, external };

std::string to_string(PanoramaStyle style);
PanoramaStyle parse_style(std::string_view name);

/// Equirectangular full-sphere panorama: column = longitude, row = latitude.
struct Panorama {
  RgbImage image;
  std::string source_id;
  PanoramaStyle style = PanoramaStyle::external;

  int width() const { return image.width; }
  int height() const { return image.height; }
};

/// Wraps an image as a panorama; enforces width = 2 * height and width >= 64.
Panorama make_panorama(RgbImage image, std::string source_id, PanoramaStyle style);
Panorama load_panorama(const std::filesystem::path& path);

/// Procedural panorama. Above latitude 0 every pixel comes from the style's
/// upper palette family, below it from the lower family, with a hard edge at
/// latitude 0 and a clean band of base color on both sides of it.
Panorama synth_panorama(std::uint64_t seed, PanoramaStyle style, int height_px = 256);

/// True when a color belongs to an upper (sky / ceiling) palette family. All
/// procedural palettes are separated by channel sum around a common threshold.
bool in_upper_palette(const std::uint8_t* rgb);
inline constexpr int kPaletteSumThreshold = 360;

/// Continuous panorama coordinates (u, v) of a direction, pixel (i, j)
/// covering [i, i+1) x [j, j+1).
Eigen::Vector2d equirect_coords(int width, int height, const Eigen::Vector3d& dir);

/// Bilinear lookup with horizontal wrap-around and vertical clamp.
Eigen::Vector3d equirect_lookup(const Panorama& pano, const Eigen::Vector3d& dir);

/// Virtual camera for one square crop.
struct CropSpec {
  Intrinsics<double> intr;
  Extrinsics<double> ext;

  int size() const { return intr.width_px; }
};

/// Builds a crop spec from degrees, checking the sampler ranges.
CropSpec make_crop_spec(double f_px, double pitch_deg, double roll_deg, double yaw_deg,
                        int size_px);

/// World-frame unit ray through continuous pixel coordinates (u, v).
Eigen::Vector3d pixel_direction(const CropSpec& spec, double u, double v);

RgbImage render_crop(const Panorama& pano, const CropSpec& spec, int workers = 1);

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SamplerConfig {
  std::uint64_t seed = 0;
  ValueRange focal_px{50.0, 500.0};
  ValueRange pitch_deg{-90.0, 0.0};
  ValueRange roll_deg{-45.0, 45.0};
  int crops_per_panorama = 8;
  int output_size = 64;

  /// Throws std::invalid_argument if a range is empty or leaves the defaults.
  void validate() const;
};

/// Draws focal ~ U[lo, hi), pitch ~ U(lo, hi], roll ~ U[lo, hi), yaw ~ U[0, 360).
CropSpec sample_params(Rng& rng, const SamplerConfig& cfg);

class HorizonNotInFrame : public std::runtime_error {
 public:
  HorizonNotInFrame() : std::runtime_error("horizon not in frame") {}
};

/// Mean fractional row (v-down pixel coordinate) of the upper-to-lower palette
/// transition of a zero-roll crop of a procedural panorama.
double measure_horizon_row(const RgbImage& crop);

}  // namespace calibfw
