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

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace calibfw {

using Rgb8 = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * std::size_t(h) * 3, 0) {}

  std::uint8_t* at(int x, int y) { return pixels.data() + (std::size_t(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (std::size_t(y) * width + x) * 3;
  }

  void set(int x, int y, const Rgb8& c) {
    auto* p = at(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  Rgb8 get(int x, int y) const {
    const auto* p = at(x, y);
    return {p[0], p[1], p[2]};
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit RGB PNG (gray, palette and alpha inputs are converted).
RgbImage read_png(const std::filesystem::path& path);

/// Writes an RGB8 PNG with fixed encoder settings so identical pixels give
/// identical bytes.
void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace calibfw
