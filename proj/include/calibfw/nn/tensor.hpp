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

#include <string>

#include <Eigen/Core>

namespace calibfw::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Batch x channels x height x width activations stored channel-planar:
/// `values` is (batch * height * width) x channels, column-major, so each
/// channel of each sample is one contiguous run of height * width values
/// (row-major within the plane).
template <typename Scalar>
struct Tensor {
  int batch = 0;
  int channels = 0;
  int height = 1;
  int width = 1;
  Matrix<Scalar> values;

  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : batch(n), channels(c), height(h), width(w), values(Matrix<Scalar>::Zero(n * h * w, c)) {}

  int spatial() const { return height * width; }

  auto sample(int n) { return values.middleRows(Eigen::Index(n) * spatial(), spatial()); }
  auto sample(int n) const { return values.middleRows(Eigen::Index(n) * spatial(), spatial()); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> t;
    t.batch = batch;
    t.channels = channels;
    t.height = height;
    t.width = width;
    t.values = values.template cast<Other>();
    return t;
  }
};

/// A named trainable matrix with its gradient (same shape).
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
};

}  // namespace calibfw::nn
