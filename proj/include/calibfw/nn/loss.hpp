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
#include <stdexcept>

#include "calibfw/nn/tensor.hpp"

namespace calibfw::nn {

/// Scalar loss value and its gradient with respect to the prediction argument.
template <typename Scalar>
struct LossValue {
  Scalar value = Scalar(0);
  Matrix<Scalar> grad;
};

/// Smooth-L1 with unit threshold: 0.5 d^2 when |d| < 1, |d| - 0.5 otherwise,
/// d = target - pred, averaged over every element of the batch x outputs block.
template <typename Scalar, typename PredT, typename TargetT>
LossValue<Scalar> smooth_l1(const Eigen::MatrixBase<PredT>& pred,
                            const Eigen::MatrixBase<TargetT>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("smooth_l1: prediction and target shapes differ");
  LossValue<Scalar> out;
  out.grad.resize(pred.rows(), pred.cols());
  const Eigen::Index count = pred.size();
  if (count == 0) return out;
  const Scalar inv = Scalar(1) / Scalar(count);
  Scalar total = Scalar(0);
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const Scalar diff = Scalar(pred(i, j)) - Scalar(target(i, j));
      const Scalar a = std::abs(diff);
      if (a < Scalar(1)) {
        total += Scalar(0.5) * diff * diff;
        out.grad(i, j) = diff * inv;
      } else {
        total += a - Scalar(0.5);
        out.grad(i, j) = (diff > Scalar(0) ? Scalar(1) : Scalar(-1)) * inv;
      }
    }
  }
  out.value = total * inv;
  return out;
}

}  // namespace calibfw::nn
