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

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "calibfw/dataset.hpp"
#include "calibfw/nn/network.hpp"
#include "calibfw/nn/optimizer.hpp"

namespace calibfw::nn {

/// Copies samples `indices` of a set into a batch tensor.
Tensor<float> gather_batch(const LabeledSet& set, std::span<const int> indices);

struct Inference {
  Eigen::MatrixXd outputs;   // count x 3
  Eigen::MatrixXd features;  // count x F
};

/// Outputs and feature taps for a whole set. Samples are processed in fixed
/// chunks of `chunk` consecutive samples distributed over `workers` threads,
/// so results do not depend on the worker count.
Inference infer(const Network<float>& net, const LabeledSet& set, int workers = 1, int chunk = 64);

/// Network predictions (count x 3) for a whole set; see infer().
Eigen::MatrixXd predict(const Network<float>& net, const LabeledSet& set, int workers = 1,
                        int chunk = 64);

/// Per-output mean squared errors (focal, pitch, roll).
Eigen::Vector3d per_output_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

/// Mean of the three per-output MSEs.
double mu_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct TrainConfig {
  int epochs = 10;
  int batch_size = kDefaultBatchSize;
  double lr = kDefaultLearningRate;
  double momentum = 0.0;
  int workers = 1;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // rate used during the epoch
  double train_loss = 0.0;
  double loss_new = 0.0;
  double loss_distill = 0.0;
  std::optional<double> val_mu_mse_old;
  std::optional<double> val_mu_mse_new;
};

/// History line for plain training: {epoch, lr, train_loss, loss_terms, val_muMSE}.
nlohmann::json base_history_json(const EpochRecord& r);

/// History line for incremental runs: {epoch, lr, train_loss, loss_terms{new, distill},
/// val_muMSE_old, val_muMSE_new}.
nlohmann::json incremental_history_json(const EpochRecord& r);

void write_history(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

/// Plain supervised training with smooth-L1, SGD and the plateau rule driven
/// by validation muMSE. Single-threaded apart from validation inference.
std::vector<EpochRecord> train_network(Network<float>& net, OptimizerState& state, Rng& rng,
                                       const LabeledSet& train, const LabeledSet& val,
                                       const TrainConfig& cfg,
                                       const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace calibfw::nn
