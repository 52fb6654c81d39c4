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
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "calibfw/nn/network.hpp"

namespace calibfw::nn {

inline constexpr double kDefaultLearningRate = 0.003;
inline constexpr int kDefaultBatchSize = 16;

/// Reduce-on-plateau bookkeeping: after `patience` consecutive epochs without
/// a strict improvement of the best metric, lr is multiplied by `factor`.
struct PlateauTracker {
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  int patience = 2;
  double factor = 0.1;
};

struct OptimizerState {
  double lr = kDefaultLearningRate;
  double momentum = 0.0;
  int epoch = 0;
  PlateauTracker plateau;
  /// One buffer per parameter; empty unless momentum > 0.
  std::vector<Matrix<float>> velocity;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& param)
      : std::runtime_error("divergence: non-finite gradient in " + param), parameter(param) {}
  std::string parameter;
};

/// p <- p - lr * g (or the heavy-ball variant when momentum > 0), using the
/// gradients stored in the network's parameters.
template <typename Scalar>
void sgd_step(Network<Scalar>& net, OptimizerState& state) {
  if (!(state.lr >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  auto& params = net.parameters();
  for (const auto& p : params)
    if (!p.grad.allFinite()) throw DivergenceError(p.name);
  const Scalar lr = static_cast<Scalar>(state.lr);
  if (state.momentum == 0.0) {
    for (auto& p : params) p.value.noalias() -= lr * p.grad;
    return;
  }
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const auto& p : params) state.velocity.push_back(Matrix<float>::Zero(p.value.rows(), p.value.cols()));
  }
  const float mu = static_cast<float>(state.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.velocity[i] = mu * state.velocity[i] + params[i].grad.template cast<float>();
    params[i].value.noalias() -= lr * state.velocity[i].template cast<Scalar>();
  }
}

/// Feeds one epoch's validation metric to the plateau rule. Returns true when
/// the learning rate was reduced.
inline bool plateau_update(OptimizerState& state, double metric) {
  if (!std::isfinite(metric)) throw std::invalid_argument("plateau_update: metric is not finite");
  auto& pl = state.plateau;
  if (metric < pl.best) {
    pl.best = metric;
    pl.bad_epochs = 0;
    return false;
  }
  if (++pl.bad_epochs >= pl.patience) {
    state.lr *= pl.factor;
    pl.bad_epochs = 0;
    return true;
  }
  return false;
}

}  // namespace calibfw::nn
