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
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "calibfw/dataset.hpp"
#include "calibfw/nn/loss.hpp"
#include "calibfw/nn/network.hpp"
#include "calibfw/nn/optimizer.hpp"
#include "calibfw/nn/training.hpp"

namespace calibfw {

enum class StrategyKind { finetune, lwf, icarl, lucir, bic };

std::string to_string(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

enum class HerdingMode { global, binned };

std::string to_string(HerdingMode mode);
HerdingMode parse_herding_mode(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::finetune;
  double lambda0 = 1.0;  // output distillation weight
  double exemplar_pct = 0.0;
  double lambda_dist = 1.0;  // less-forget weight
  double bic_val_fraction = 0.1;
  /// Distill on exemplar rows too, not only on new-data rows.
  bool distill_on_exemplars = true;
  HerdingMode herding = HerdingMode::global;
  int herding_bins = 5;

  /// Throws std::invalid_argument for out-of-range fields or an exemplar
  /// budget on a strategy that keeps no exemplars.
  void validate() const;

  /// The simplest strategy producing the same training trajectory:
  /// lwf with lambda0 = 0 is finetune, icarl with no exemplars is lwf.
  StrategyKind equivalent_kind() const;

  bool distills_outputs() const;
  bool keeps_exemplars() const;

  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Losses. Every gradient is with respect to the named prediction argument.

template <typename Scalar>
struct LwfLoss {
  Scalar value = Scalar(0);
  Scalar new_term = Scalar(0);
  Scalar distill_term = Scalar(0);
  nn::Matrix<Scalar> grad_new;  // d/d pred_new
  nn::Matrix<Scalar> grad_cur;  // d/d pred_cur
};

/// smooth_l1(target_new, pred_new) + lambda0 * smooth_l1(teacher_out, pred_cur).
template <typename Scalar>
LwfLoss<Scalar> lwf_loss(const nn::Matrix<Scalar>& pred_new, const nn::Matrix<Scalar>& target_new,
                         const nn::Matrix<Scalar>& pred_cur,
                         const nn::Matrix<Scalar>& teacher_out, Scalar lambda0) {
  if (pred_cur.rows() != teacher_out.rows() || pred_cur.cols() != teacher_out.cols())
    throw std::invalid_argument("lwf_loss: teacher and current batches differ");
  const auto fresh = nn::smooth_l1<Scalar>(pred_new, target_new);
  const auto distill = nn::smooth_l1<Scalar>(pred_cur, teacher_out);
  LwfLoss<Scalar> out;
  out.new_term = fresh.value;
  out.distill_term = distill.value;
  out.value = fresh.value + lambda0 * distill.value;
  out.grad_new = fresh.grad;
  out.grad_cur = lambda0 * distill.grad;
  return out;
}

template <typename Scalar>
struct LessForget {
  Scalar value = Scalar(0);
  nn::Matrix<Scalar> grad;  // d/d f_cur
};

/// mean over rows of 1 - cos(f_teacher, f_cur).
template <typename Scalar>
LessForget<Scalar> less_forget(const nn::Matrix<Scalar>& f_cur, const nn::Matrix<Scalar>& f_teacher) {
  if (f_cur.rows() != f_teacher.rows() || f_cur.cols() != f_teacher.cols())
    throw std::invalid_argument("less_forget: teacher and current features differ in shape");
  LessForget<Scalar> out;
  out.grad.resize(f_cur.rows(), f_cur.cols());
  if (f_cur.rows() == 0) return out;
  const Scalar inv = Scalar(1) / Scalar(f_cur.rows());
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i < f_cur.rows(); ++i) {
    const Scalar nc = f_cur.row(i).norm();
    const Scalar nt = f_teacher.row(i).norm();
    if (!(nc > Scalar(0)) || !(nt > Scalar(0))) throw nn::DegenerateFeature();
    const Scalar cos = f_cur.row(i).dot(f_teacher.row(i)) / (nc * nt);
    total += Scalar(1) - cos;
    // d cos / d f_cur = t/(|c||t|) - cos * c/|c|^2
    out.grad.row(i) = -inv * (f_teacher.row(i) / (nc * nt) - cos * f_cur.row(i) / (nc * nc));
  }
  out.value = total * inv;
  return out;
}

template <typename Scalar>
struct LucirLoss {
  Scalar value = Scalar(0);
  Scalar new_term = Scalar(0);
  Scalar distill_term = Scalar(0);
  nn::Matrix<Scalar> grad_pred;
  nn::Matrix<Scalar> grad_features;
};

/// smooth_l1(target, pred) + lambda_dist * mean(1 - cos(f_teacher, f_cur)).
template <typename Scalar>
LucirLoss<Scalar> lucir_loss(const nn::Matrix<Scalar>& pred, const nn::Matrix<Scalar>& target,
                             const nn::Matrix<Scalar>& f_cur, const nn::Matrix<Scalar>& f_teacher,
                             Scalar lambda_dist) {
  const auto fit = nn::smooth_l1<Scalar>(pred, target);
  const auto lf = less_forget<Scalar>(f_cur, f_teacher);
  LucirLoss<Scalar> out;
  out.new_term = fit.value;
  out.distill_term = lf.value;
  out.value = fit.value + lambda_dist * lf.value;
  out.grad_pred = fit.grad;
  out.grad_features = lambda_dist * lf.grad;
  return out;
}

// ---------------------------------------------------------------------------
// Bias correction.

struct BiCParams {
  Eigen::Vector3d alpha = Eigen::Vector3d::Ones();
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();

  bool is_identity() const { return alpha == Eigen::Vector3d::Ones() && beta.isZero(0.0); }
  nlohmann::json to_json() const;
  static BiCParams from_json(const nlohmann::json& j);
};

/// q_k = alpha_k * o_k + beta_k per output column.
template <typename Derived>
Eigen::MatrixXd bic_apply(const Eigen::MatrixBase<Derived>& outputs, const BiCParams& params) {
  if (outputs.cols() != 3) throw std::invalid_argument("bic_apply: outputs must have 3 columns");
  Eigen::MatrixXd q = outputs.template cast<double>();
  for (int k = 0; k < 3; ++k) q.col(k) = (params.alpha[k] * q.col(k).array() + params.beta[k]).matrix();
  return q;
}

struct BiCLoss {
  double value = 0.0;
  Eigen::Vector3d grad_alpha = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad_beta = Eigen::Vector3d::Zero();
};

/// smooth_l1(bic_apply(outputs), targets) and its gradient in (alpha, beta).
BiCLoss bic_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets,
                 const BiCParams& params);

class BiCError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BiCFitOptions {
  int max_iterations = 1000;
  double tolerance = 1e-12;  // stop once every parameter step is below this
};

/// Fits (alpha_k, beta_k) on frozen outputs by descent on bic_loss. Each step
/// minimizes the quadratic upper bound given by the least-squares Hessian, so
/// inside the quadratic smooth-L1 region one step lands on the least-squares
/// line. `is_old` flags old-domain rows; both domains must be present in equal
/// numbers.
BiCParams bic_fit(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets,
                  const std::vector<bool>& is_old, const BiCFitOptions& options = {});

/// Closed-form least-squares line fit of targets on outputs, per column.
BiCParams least_squares_line(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets);

// ---------------------------------------------------------------------------
// Exemplars.

/// Greedy herding toward the mean feature vector. Returns the first m picks
/// of the full herding order; ties go to the lowest index.
std::vector<int> herd_exemplars(const Eigen::MatrixXd& features, int m);

/// Herding inside bins of `bin_values` (equal-width bins over [lo, hi]).
/// Picks are merged so that every prefix spreads the budget across bins in
/// proportion to their size.
std::vector<int> herd_exemplars_binned(const Eigen::MatrixXd& features,
                                       const Eigen::VectorXd& bin_values, int bins, double lo,
                                       double hi, int m);

struct ExemplarMemory {
  double pct = 0.0;
  int old_train_size = 0;
  /// Full herding order over the old training set.
  std::vector<int> order;
  /// Retained records: the first budget() entries of `order`.
  LabeledSet data;

  int budget() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

/// round(pct / 100 * n).
int exemplar_budget(double pct, int n);

ExemplarMemory build_memory(const LabeledSet& old_train, std::vector<int> order, double pct);

/// Mini-batches over a pool of `new_count` new records followed by
/// `memory_count` exemplars (pool indices new_count..). One shuffle per call.
std::vector<std::vector<int>> build_replay_stream(int new_count, int memory_count,
                                                  int batch_size, Rng& rng);

// ---------------------------------------------------------------------------
// Teacher and training loop.

/// FNV-1a over parameter names, shapes and float bytes.
std::uint64_t parameter_hash(const nn::Network<float>& net);

/// A frozen copy of a network used as the distillation teacher.
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const nn::Network<float>& net) : net_(net), hash_(parameter_hash(net)) {}

  nn::ForwardPass<float> forward(const nn::Tensor<float>& x) const { return net_.forward(x); }
  const nn::Network<float>& network() const { return net_; }
  std::uint64_t hash() const { return hash_; }
  bool unchanged() const { return parameter_hash(net_) == hash_; }

 private:
  nn::Network<float> net_;
  std::uint64_t hash_;
};

struct IncrementalData {
  const LabeledSet& old_train;  // may be empty when no exemplars are kept
  const LabeledSet& old_val;    // may be empty; then val_muMSE_old is null
  const LabeledSet& new_train;
  const LabeledSet& new_val;
};

struct IncrementalResult {
  nn::Network<float> net;
  nn::OptimizerState optimizer;
  std::optional<BiCParams> bic;
  std::vector<nn::EpochRecord> history;
  ExemplarMemory memory;
  std::uint64_t teacher_hash = 0;
  bool teacher_unchanged = true;

  /// Checkpoint metadata: the BiC parameters when present, nothing otherwise.
  nlohmann::json checkpoint_extra() const;
};

class StrategyMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two-domain incremental update of `base`. `rng` drives exemplar ordering,
/// the BiC hold-out and the per-epoch shuffles. `max_steps` > 0 stops after
/// that many optimizer steps (the partial epoch is still recorded).
IncrementalResult train_incremental(const nn::Network<float>& base, const IncrementalData& data,
                                    const StrategyConfig& strategy, const nn::TrainConfig& train,
                                    Rng& rng,
                                    const std::function<void(const nn::EpochRecord&)>& on_epoch = {},
                                    int max_steps = 0);

}  // namespace calibfw
