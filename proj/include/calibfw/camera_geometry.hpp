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

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace calibfw {

// Frames and pixel axes used throughout the project:
//  * world: x right, y up, z forward (yaw 0 looks down +z);
//  * camera: x right, y up, z along the optical axis;
//  * pixels: u rightward, v downward, origin at the top-left corner, pixel
//    (i, j) covers [i, i+1) x [j, j+1), principal point at (width/2, height/2);
//  * image units: y up, +1 at the top edge and -1 at the bottom edge.

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/// Square-pixel pinhole intrinsics with the principal point at the image center.
template <typename Scalar = double>
struct Intrinsics {
  Scalar f_px = Scalar(100);
  int width_px = 64;
  int height_px = 64;

  Vector2<Scalar> principal_point() const {
    return {Scalar(width_px) / Scalar(2), Scalar(height_px) / Scalar(2)};
  }

  /// diag(f, f, 1) composed with the y-up to v-down pixel flip and the
  /// principal-point shift.
  Matrix3<Scalar> K() const {
    const auto c = principal_point();
    Matrix3<Scalar> k;
    // clang-format off
    k << f_px,  Scalar(0), c.x(),
         Scalar(0), -f_px, c.y(),
         Scalar(0), Scalar(0), Scalar(1);
    // clang-format on
    return k;
  }
};

/// Camera orientation. Translation is always zero.
template <typename Scalar = double>
struct Extrinsics {
  Scalar pitch_rad = Scalar(0);
  Scalar roll_rad = Scalar(0);
  /// Only used to pick scene content; never a regression target.
  Scalar yaw_rad = Scalar(0);
};

template <typename Scalar>
Matrix3<Scalar> rotation_x(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << Scalar(1), Scalar(0), Scalar(0), Scalar(0), c, -s, Scalar(0), s, c;
  return r;
}

template <typename Scalar>
Matrix3<Scalar> rotation_y(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << c, Scalar(0), s, Scalar(0), Scalar(1), Scalar(0), -s, Scalar(0), c;
  return r;
}

template <typename Scalar>
Matrix3<Scalar> rotation_z(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << c, -s, Scalar(0), s, c, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  return r;
}

/// World-to-camera rotation R = Rz(roll) * Rx(pitch) * Ry(yaw).
template <typename Scalar>
Matrix3<Scalar> rotation_matrix(const Extrinsics<Scalar>& ext) {
  return rotation_z(ext.roll_rad) * rotation_x(ext.pitch_rad) * rotation_y(ext.yaw_rad);
}

/// Projects a world point. Returns std::nullopt when the point is not in
/// front of the camera (homogeneous depth <= 0).
template <typename Scalar>
std::optional<Vector2<Scalar>> project_point(const Intrinsics<Scalar>& intr,
                                             const Extrinsics<Scalar>& ext,
                                             const Vector3<Scalar>& p_world) {
  const Vector3<Scalar> h = intr.K() * (rotation_matrix(ext) * p_world);
  if (!(h.z() > Scalar(0))) return std::nullopt;
  return Vector2<Scalar>(h.x() / h.z(), h.y() / h.z());
}

/// Height-normalized horizon midpoint: where the horizon of an unrolled camera
/// crosses the central vertical axis, in image units (top +1, bottom -1).
/// A camera pitched down (pitch < 0) sees the horizon above center.
template <typename Scalar>
Scalar horizon_midpoint(Scalar f_px, Scalar pitch_rad, int height_px) {
  if (height_px < 2) throw std::invalid_argument("horizon_midpoint: height_px must be >= 2");
  return Scalar(-2) * f_px * std::tan(pitch_rad) / Scalar(height_px);
}

/// Pixel row (continuous, v-down) of an image-unit y coordinate.
template <typename Scalar>
Scalar image_units_to_row(Scalar y_units, int height_px) {
  return Scalar(height_px) * (Scalar(1) - y_units) / Scalar(2);
}

template <typename Scalar>
Scalar row_to_image_units(Scalar row, int height_px) {
  return Scalar(1) - Scalar(2) * row / Scalar(height_px);
}

template <typename Scalar = double>
struct HorizonLine {
  Scalar midpoint_units = Scalar(0);
  Scalar roll_rad = Scalar(0);
};

template <typename Scalar>
HorizonLine<Scalar> horizon_line(Scalar f_px, Scalar pitch_rad, Scalar roll_rad, int height_px) {
  return {horizon_midpoint(f_px, pitch_rad, height_px), roll_rad};
}

/// Endpoints (u = 0 and u = width) of the projected horizon in pixels. The
/// line rises to the right by tan(roll) in the y-up frame and crosses the
/// central column at midpoint / cos(roll), which is where Rz(roll) carries
/// the unrolled horizon.
template <typename Scalar>
std::pair<Vector2<Scalar>, Vector2<Scalar>> horizon_endpoints(Scalar f_px, Scalar pitch_rad,
                                                              Scalar roll_rad, int width_px,
                                                              int height_px) {
  const Scalar bp = horizon_midpoint(f_px, pitch_rad, height_px);
  const Scalar center_row = image_units_to_row(bp / std::cos(roll_rad), height_px);
  const Scalar half_w = Scalar(width_px) / Scalar(2);
  const Scalar dv = std::tan(roll_rad) * half_w;
  return {Vector2<Scalar>(Scalar(0), center_row + dv),
          Vector2<Scalar>(Scalar(width_px), center_row - dv)};
}

// Ground-truth normalization: divide by the largest magnitude of each range.
inline constexpr double kFocalMaxPx = 500.0;
inline constexpr double kFocalMinPx = 50.0;
inline constexpr double kPitchMaxAbsDeg = 90.0;
inline constexpr double kRollMaxAbsDeg = 45.0;

/// Normalized regression target (focal, pitch, roll), all dimensionless.
struct CalibrationTarget {
  double focal_n = 0.0;
  double pitch_n = 0.0;
  double roll_n = 0.0;
};

struct RawCalibration {
  double f_px = 0.0;
  double pitch_rad = 0.0;
  double roll_rad = 0.0;
};

inline CalibrationTarget normalize_target(double f_px, double pitch_rad, double roll_rad) {
  constexpr double tol = 1e-9;
  const double pitch_deg = rad_to_deg(pitch_rad);
  const double roll_deg = rad_to_deg(roll_rad);
  if (!(f_px >= kFocalMinPx - tol && f_px <= kFocalMaxPx + tol))
    throw std::invalid_argument("normalize_target: focal " + std::to_string(f_px) +
                                " px outside [50, 500]");
  if (!(pitch_deg >= -kPitchMaxAbsDeg - tol && pitch_deg <= tol))
    throw std::invalid_argument("normalize_target: pitch " + std::to_string(pitch_deg) +
                                " deg outside [-90, 0]");
  if (!(std::abs(roll_deg) <= kRollMaxAbsDeg + tol))
    throw std::invalid_argument("normalize_target: roll " + std::to_string(roll_deg) +
                                " deg outside [-45, 45]");
  return {f_px / kFocalMaxPx, pitch_deg / kPitchMaxAbsDeg, roll_deg / kRollMaxAbsDeg};
}

template <typename Scalar>
CalibrationTarget normalize_target(const Intrinsics<Scalar>& intr, const Extrinsics<Scalar>& ext) {
  return normalize_target(double(intr.f_px), double(ext.pitch_rad), double(ext.roll_rad));
}

/// Inverse of normalize_target. Does not range-check, so network predictions
/// outside the training ranges can still be drawn.
inline RawCalibration denormalize_target(const CalibrationTarget& t) {
  return {t.focal_n * kFocalMaxPx, deg_to_rad(t.pitch_n * kPitchMaxAbsDeg),
          deg_to_rad(t.roll_n * kRollMaxAbsDeg)};
}

}  // namespace calibfw
