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
#include <string>
#include <vector>

#include "calibfw/dataset.hpp"
#include "calibfw/incremental.hpp"
#include "calibfw/nn/network.hpp"

namespace calibfw {

struct EvalReport {
  std::string model;
  std::string dataset;
  double mse_focal = 0.0;
  double mse_pitch = 0.0;
  double mse_roll = 0.0;
  double mu_mse = 0.0;
  int n = 0;
};

/// Exact per-channel MSE over every row; columns are (focal, pitch, roll).
EvalReport make_report(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& targets,
                       std::string model, std::string dataset);

struct EvalResult {
  EvalReport raw;
  /// Present when bias-correction parameters were supplied; model id gets a
  /// "+bic" suffix.
  std::optional<EvalReport> corrected;
};

EvalResult evaluate(const nn::Network<float>& net, const LabeledSet& set, const std::string& model,
                    const std::optional<BiCParams>& bic = std::nullopt, int workers = 1);

struct NamedModel {
  std::string name;
  const nn::Network<float>* net = nullptr;
  std::optional<BiCParams> bic;
};

struct NamedSet {
  std::string name;
  const LabeledSet* set = nullptr;
};

/// Every model on every dataset, model-major. BiC-corrected rows follow their
/// raw row.
std::vector<EvalReport> cross_evaluate(const std::vector<NamedModel>& models,
                                       const std::vector<NamedSet>& datasets, int workers = 1);

struct SweepRow {
  double pct = 0.0;
  double mu_mse_old = 0.0;
  double mu_mse_new = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // strictly increasing pct
};

struct SweepSetup {
  const nn::Network<float>& base;
  IncrementalData data;
  const LabeledSet& old_eval;
  const LabeledSet& new_eval;
};

/// One incremental run per percentage, each from a fresh Rng(seed). `strategy`
/// supplies every field except exemplar_pct.
SweepResult exemplar_sweep(const SweepSetup& setup, std::vector<double> pcts,
                           const StrategyConfig& strategy, const nn::TrainConfig& train,
                           std::uint64_t seed);

/// CSV with header model,dataset,mse_focal,mse_roll,mse_pitch,mu_mse,n.
void emit_csv(const std::vector<EvalReport>& reports, const std::filesystem::path& path);
void emit_sweep_csv(const SweepResult& sweep, const std::filesystem::path& path);

/// Grouped bar chart of muMSE: one group per model, one bar per dataset.
void emit_svg(const std::vector<EvalReport>& reports, const std::filesystem::path& path);

/// Line chart of muMSE against exemplar percentage, one series per domain.
void emit_sweep_svg(const SweepResult& sweep, const std::filesystem::path& path,
                    const std::string& old_label = "old domain",
                    const std::string& new_label = "new domain");

}  // namespace calibfw
