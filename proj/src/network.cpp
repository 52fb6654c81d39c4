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

#include "calibfw/nn/network.hpp"

namespace calibfw::nn {

std::string to_string(HeadKind head) { return head == HeadKind::cosine ? "cosine" : "affine"; }

HeadKind parse_head(std::string_view name) {
  if (name == "affine") return HeadKind::affine;
  if (name == "cosine") return HeadKind::cosine;
  throw std::invalid_argument("unknown head '" + std::string(name) +
                              "' (valid heads: affine, cosine)");
}

std::string to_string(FeatureActivation act) {
  return act == FeatureActivation::tanh ? "tanh" : "identity";
}

FeatureActivation parse_feature_activation(std::string_view name) {
  if (name == "tanh") return FeatureActivation::tanh;
  if (name == "identity") return FeatureActivation::identity;
  throw std::invalid_argument("unknown feature activation '" + std::string(name) + "'");
}

void ArchConfig::validate() const {
  if (input_channels < 1) throw std::invalid_argument("arch: input_channels must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("arch: feature_dim must be >= 1");
  int size = input_size;
  for (int c : conv_channels) {
    if (c < 1) throw std::invalid_argument("arch: conv channel counts must be >= 1");
    if (size < 2 || size % 2 != 0)
      throw std::invalid_argument("arch: input_size " + std::to_string(input_size) +
                                  " is not divisible by 2^" +
                                  std::to_string(conv_channels.size()));
    size /= 2;
  }
  if (input_size < 1) throw std::invalid_argument("arch: input_size must be >= 1");
}

std::vector<std::string> arch_names() { return {"calibnet-tiny", "calibnet-micro", "linear"}; }

ArchConfig arch_preset(std::string_view name, HeadKind head, int input_size) {
  ArchConfig a;
  a.name = std::string(name);
  a.head = head;
  a.input_size = input_size;
  if (name == "calibnet-tiny") {
    a.conv_channels = {16, 32, 64};
    a.feature_dim = 64;
  } else if (name == "calibnet-micro") {
    a.conv_channels = {4, 8, 8};
    a.feature_dim = 8;
  } else if (name == "linear") {
    a.conv_channels = {};
    a.feature_dim = 8;
    a.feature_activation = FeatureActivation::identity;
  } else {
    std::string valid;
    for (const auto& n : arch_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown architecture '" + std::string(name) +
                                "' (valid architectures: " + valid + ")");
  }
  a.validate();
  return a;
}

}  // namespace calibfw::nn
