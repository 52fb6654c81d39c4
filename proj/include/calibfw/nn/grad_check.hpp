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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "calibfw/nn/network.hpp"

namespace calibfw::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  int coordinates = 0;
};

/// Loss value and its gradients with respect to the network outputs and
/// (optionally) the feature tap.
struct NetObjective {
  double value = 0.0;
  Matrix<double> d_outputs;
  Matrix<double> d_features;  // empty when the loss does not use features
};

using ObjectiveFn = std::function<NetObjective(const ForwardPass<double>&)>;

/// Central finite differences against analytic gradients over an arbitrary
/// parameter set. `loss` evaluates the scalar at the current parameter values;
/// `analytic` writes d(loss)/d(param) into every Parameter::grad. Parameters
/// with more than `max_coords` entries are checked on a random subsample.
/// Error per coordinate: |g_ad - g_fd| / max(1e-6, |g_ad| + |g_fd|).
inline GradCheckResult grad_check(std::span<Parameter<double>* const> params,
                                  const std::function<double()>& loss,
                                  const std::function<void()>& analytic, double eps,
                                  int max_coords, Rng& rng) {
  analytic();
  std::vector<Matrix<double>> grads;
  for (auto* p : params) grads.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = params[pi]->value;
    std::vector<Eigen::Index> coords(std::size_t(value.size()));
    std::iota(coords.begin(), coords.end(), Eigen::Index(0));
    if (max_coords > 0 && coords.size() > std::size_t(max_coords)) {
      rng.shuffle(std::span<Eigen::Index>(coords));
      coords.resize(std::size_t(max_coords));
      std::sort(coords.begin(), coords.end());
    }
    for (const Eigen::Index k : coords) {
      double& x = value.data()[k];
      const double saved = x;
      x = saved + eps;
      const double up = loss();
      x = saved - eps;
      const double down = loss();
      x = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = grads[pi].data()[k];
      const double err = std::abs(ad - fd) / std::max(1e-6, std::abs(ad) + std::abs(fd));
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = err;
        result.worst_parameter = params[pi]->name;
        result.worst_index = k;
      }
    }
  }
  return result;
}

/// Gradient check of every network parameter under `objective` evaluated on a
/// fixed input batch.
inline GradCheckResult grad_check(Network<double>& net, const Tensor<double>& batch,
                                  const ObjectiveFn& objective, double eps = 1e-5,
                                  int max_coords = 200, std::uint64_t seed = 7) {
  std::vector<Parameter<double>*> params;
  for (auto& p : net.parameters()) params.push_back(&p);
  Rng rng(seed);
  return grad_check(
      params, [&] { return objective(net.forward(batch)).value; },
      [&] {
        const auto pass = net.forward(batch);
        const NetObjective obj = objective(pass);
        net.backward(pass, obj.d_outputs, obj.d_features.size() ? &obj.d_features : nullptr);
      },
      eps, max_coords, rng);
}

}  // namespace calibfw::nn
