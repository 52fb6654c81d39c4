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

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "calibfw/nn/network.hpp"
#include "calibfw/nn/optimizer.hpp"

namespace calibfw::nn {

// File layout:
//   "CFW1" | u32 little-endian header length | JSON header |
//   float32 little-endian blobs, one per header "params" entry, in order
//   (parameters first, then momentum buffers when present).
inline constexpr char kCheckpointMagic[4] = {'C', 'F', 'W', '1'};
inline constexpr int kCheckpointSchemaVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  Network<float> net;
  OptimizerState optimizer;
  std::string rng_state;
  /// Free-form metadata owned by higher layers (e.g. bias-correction params).
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net,
                     const OptimizerState& optimizer, const std::string& rng_state = {},
                     const nlohmann::json& extra = nlohmann::json::object());

/// Loads a checkpoint. When `expected` is given, the stored architecture must
/// match it or a CheckpointError describing the shape disagreement is thrown.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<ArchConfig>& expected = std::nullopt);

}  // namespace calibfw::nn
