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

#include "calibfw/nn/training.hpp"

#include <fstream>
#include <numeric>

#include "calibfw/nn/loss.hpp"
#include "calibfw/parallel.hpp"

namespace calibfw::nn {

using json = nlohmann::json;

Tensor<float> gather_batch(const LabeledSet& set, std::span<const int> indices) {
  const int s = set.image_size;
  Tensor<float> t(static_cast<int>(indices.size()), 3, s, s);
  for (std::size_t k = 0; k < indices.size(); ++k)
    t.sample(static_cast<int>(k)) = set.images.middleRows(Eigen::Index(indices[k]) * s * s, s * s);
  return t;
}

Inference infer(const Network<float>& net, const LabeledSet& set, int workers, int chunk) {
  if (chunk < 1) throw std::invalid_argument("infer: chunk must be >= 1");
  const int n = set.size();
  Inference out{Eigen::MatrixXd(n, 3), Eigen::MatrixXd(n, net.arch().feature_dim)};
  if (n == 0) return out;
  const std::size_t chunks = (std::size_t(n) + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const int begin = static_cast<int>(c) * chunk;
    const int end = std::min(n, begin + chunk);
    std::vector<int> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto pass = net.forward(gather_batch(set, idx));
    out.outputs.middleRows(begin, end - begin) = pass.outputs.cast<double>();
    out.features.middleRows(begin, end - begin) = pass.features.cast<double>();
  });
  return out;
}

Eigen::MatrixXd predict(const Network<float>& net, const LabeledSet& set, int workers, int chunk) {
  return infer(net, set, workers, chunk).outputs;
}

Eigen::Vector3d per_output_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != 3 || target.cols() != 3)
    throw std::invalid_argument("per_output_mse: shape mismatch");
  if (pred.rows() == 0) throw std::invalid_argument("per_output_mse: empty set");
  Eigen::Vector3d sse = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    sse += (pred.row(i) - target.row(i)).array().square().matrix().transpose();
  return sse / double(pred.rows());
}

double mu_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  const Eigen::Vector3d m = per_output_mse(pred, target);
  return (m[0] + m[1] + m[2]) / 3.0;
}

json base_history_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"loss_terms", {{"new", r.loss_new}, {"distill", r.loss_distill}}},
          {"val_muMSE", r.val_mu_mse_new ? json(*r.val_mu_mse_new) : json(nullptr)}};
}

json incremental_history_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.lr},
          {"train_loss", r.train_loss},
          {"loss_terms", {{"new", r.loss_new}, {"distill", r.loss_distill}}},
          {"val_muMSE_old", r.val_mu_mse_old ? json(*r.val_mu_mse_old) : json(nullptr)},
          {"val_muMSE_new", r.val_mu_mse_new ? json(*r.val_mu_mse_new) : json(nullptr)}};
}

void write_history(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write history " + path.string());
  for (const auto& l : lines) os << l.dump() << '\n';
  if (!os) throw std::runtime_error("failed writing history " + path.string());
}

std::vector<EpochRecord> train_network(Network<float>& net, OptimizerState& state, Rng& rng,
                                       const LabeledSet& train, const LabeledSet& val,
                                       const TrainConfig& cfg,
                                       const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("train_network: empty training set");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_network: batch size must be >= 1");
  std::vector<EpochRecord> history;
  std::vector<int> order(train.size());
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    EpochRecord rec;
    rec.epoch = ++state.epoch;
    rec.lr = state.lr;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - b);
      const std::span<const int> idx(order.data() + b, len);
      const auto pass = net.forward(gather_batch(train, idx));
      Eigen::MatrixXf target(len, 3);
      for (std::size_t k = 0; k < len; ++k) target.row(Eigen::Index(k)) = train.targets.row(idx[k]).cast<float>();
      const auto loss = smooth_l1<float>(pass.outputs, target);
      net.backward(pass, loss.grad);
      sgd_step(net, state);
      loss_sum += loss.value;
      ++batches;
    }
    rec.train_loss = loss_sum / batches;
    rec.loss_new = rec.train_loss;
    if (!val.empty()) {
      rec.val_mu_mse_new = mu_mse(predict(net, val, cfg.workers), val.targets);
      plateau_update(state, *rec.val_mu_mse_new);
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

}  // namespace calibfw::nn
