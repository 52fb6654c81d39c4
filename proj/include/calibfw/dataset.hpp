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
#include <vector>

#include <Eigen/Core>

#include "calibfw/panorama.hpp"

namespace calibfw {

enum class Split { train, val, test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct ManifestRecord {
  std::string image;  // relative to the manifest directory
  std::string panorama;
  double f_px = 0.0;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  double yaw_deg = 0.0;
  CalibrationTarget target;
  Split split = Split::train;
};

struct DatasetManifest {
  int schema_version = 1;
  std::uint64_t seed = 0;
  ValueRange focal_px{50.0, 500.0};
  ValueRange pitch_deg{-90.0, 0.0};
  ValueRange roll_deg{-45.0, 45.0};
  int crop_size = 64;
  std::vector<ManifestRecord> records;
  std::filesystem::path root;  // directory holding manifest.jsonl

  std::size_t count(Split split) const;
};

inline constexpr const char* kManifestFileName = "manifest.jsonl";

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  SamplerConfig sampler;
  /// Train + val crops. Negative means crops_per_panorama * |train/val panoramas|.
  int count = -1;
  double train_fraction = 0.8;
  /// Crops rendered from held-out panoramas.
  int test_count = 0;
  double test_panorama_fraction = 0.25;
  int workers = 1;
};

/// Renders crops, writes them under out_dir/images and writes the manifest.
/// When test_count > 0 the last ceil(fraction * |panos|) panoramas (at least
/// one) are reserved for the test split and never used for train/val.
DatasetManifest generate_dataset(const std::vector<Panorama>& panos, const DatasetConfig& cfg,
                                 const std::filesystem::path& out_dir);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Parses a manifest and checks every record's normalized triplet against its
/// raw parameters.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Loads every *.png in a directory (sorted by name) as a panorama.
std::vector<Panorama> load_panorama_dir(const std::filesystem::path& dir);

/// Crops of one split in network-ready form.
struct LabeledSet {
  std::string id;
  int image_size = 0;
  /// (count * size * size) x 3, the channel-planar layout of nn::Tensor;
  /// sample n occupies rows [n*size*size, (n+1)*size*size).
  Eigen::MatrixXf images;
  /// count x 3, columns (focal_n, pitch_n, roll_n).
  Eigen::MatrixXd targets;

  int size() const { return static_cast<int>(targets.rows()); }
  bool empty() const { return targets.rows() == 0; }
};

/// Per-image standardization used by the network: x = value / 255, then
/// (x - mean) / max(stddev, 1 / sqrt(3 * pixels)) with statistics over all
/// channels of the image.
void image_to_planes(const RgbImage& img, Eigen::Ref<Eigen::MatrixXf> out);

LabeledSet load_split(const DatasetManifest& manifest, Split split, int workers = 1);

/// Rows [indices] of a set, in the given order.
LabeledSet subset(const LabeledSet& set, const std::vector<int>& indices, std::string id);

/// Concatenation of two sets with equal image size.
LabeledSet concat(const LabeledSet& a, const LabeledSet& b, std::string id);

}  // namespace calibfw
