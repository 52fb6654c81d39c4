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

#include <optional>
#include <string_view>

#include "calibfw/camera_geometry.hpp"
#include "calibfw/image.hpp"

namespace calibfw {

struct HorizonParams {
  double f_px = 0.0;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;

  static HorizonParams from_target(const CalibrationTarget& t);
};

struct OverlayOptions {
  int scale = 4;  // nearest-neighbour upscaling before drawing
  double thickness = 2.0;
  Rgb8 truth_color{40, 220, 40};
  Rgb8 pred_color{240, 40, 40};
  bool legend = true;
};

/// Row (pixels, top = 0) where the horizon crosses the vertical center line.
double horizon_center_row(const HorizonParams& p, int height_px);

/// Upscales `img` and draws the predicted horizon, plus the true one when
/// given, with a small legend in the top-left corner.
RgbImage draw_horizon(const RgbImage& img, const std::optional<HorizonParams>& truth,
                      const HorizonParams& pred, const OverlayOptions& options = {});

/// Renders `text` (A-Z, 0-9, space) with a 5x7 bitmap font at (x, y), each
/// font pixel drawn as a `size` x `size` block. Unknown glyphs are skipped.
void draw_text(RgbImage& img, int x, int y, std::string_view text, const Rgb8& color, int size = 1);

}  // namespace calibfw
