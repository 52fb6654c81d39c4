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

#include "calibfw/incremental.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace calibfw {

using nlohmann::json;

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::finetune: return "finetune";
    case StrategyKind::lwf: return "lwf";
    case StrategyKind::icarl: return "icarl";
    case StrategyKind::lucir: return "lucir";
    case StrategyKind::bic: return "bic";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (auto k : {StrategyKind::finetune, StrategyKind::lwf, StrategyKind::icarl, StrategyKind::lucir,
                 StrategyKind::bic})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "' (valid: finetune, lwf, icarl, lucir, bic)");
}

std::string to_string(HerdingMode mode) { return mode == HerdingMode::global ? "global" : "binned"; }

HerdingMode parse_herding_mode(std::string_view name) {
  if (name == "global") return HerdingMode::global;
  if (name == "binned") return HerdingMode::binned;
  throw std::invalid_argument("unknown herding mode '" + std::string(name) + "' (valid: global, binned)");
}

void StrategyConfig::validate() const {
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0))
    throw std::invalid_argument("lambda0 must be a finite value >= 0");
  if (!(lambda_dist >= 0.0) || !std::isfinite(lambda_dist))
    throw std::invalid_argument("lambda_dist must be a finite value >= 0");
  if (!(exemplar_pct >= 0.0 && exemplar_pct <= 100.0))
    throw std::invalid_argument("exemplar_pct must lie in [0, 100]");
  if (!(bic_val_fraction > 0.0 && bic_val_fraction < 1.0))
    throw std::invalid_argument("bic_val_fraction must lie in (0, 1)");
  if (herding_bins < 1) throw std::invalid_argument("herding_bins must be >= 1");
  if (exemplar_pct > 0.0 && !keeps_exemplars())
    throw std::invalid_argument("strategy " + to_string(kind) + " keeps no exemplars; exemplar_pct must be 0");
}

bool StrategyConfig::keeps_exemplars() const {
  return kind == StrategyKind::icarl || kind == StrategyKind::lucir || kind == StrategyKind::bic;
}

bool StrategyConfig::distills_outputs() const {
  return kind == StrategyKind::lwf || kind == StrategyKind::icarl || kind == StrategyKind::bic;
}

StrategyKind StrategyConfig::equivalent_kind() const {
  StrategyKind k = kind;
  if (k == StrategyKind::icarl && exemplar_pct == 0.0) k = StrategyKind::lwf;
  if (k == StrategyKind::lwf && lambda0 == 0.0) k = StrategyKind::finetune;
  return k;
}

json StrategyConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"equivalent_kind", to_string(equivalent_kind())},
          {"lambda0", lambda0},
          {"exemplar_pct", exemplar_pct},
          {"lambda_dist", lambda_dist},
          {"bic_val_fraction", bic_val_fraction},
          {"distill_on_exemplars", distill_on_exemplars},
          {"herding", to_string(herding)},
          {"herding_bins", herding_bins}};
}

// ---------------------------------------------------------------------------

json BiCParams::to_json() const {
  return {{"alpha", {alpha[0], alpha[1], alpha[2]}}, {"beta", {beta[0], beta[1], beta[2]}}};
}

BiCParams BiCParams::from_json(const json& j) {
  BiCParams p;
  for (int k = 0; k < 3; ++k) {
    p.alpha[k] = j.at("alpha").at(k).get<double>();
    p.beta[k] = j.at("beta").at(k).get<double>();
  }
  return p;
}

BiCLoss bic_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets,
                 const BiCParams& params) {
  const Eigen::MatrixXd q = bic_apply(outputs, params);
  const auto l = nn::smooth_l1<double>(q, targets);
  BiCLoss out;
  out.value = l.value;
  for (int k = 0; k < 3; ++k) {
    out.grad_alpha[k] = l.grad.col(k).dot(outputs.col(k));
    out.grad_beta[k] = l.grad.col(k).sum();
  }
  return out;
}

BiCParams least_squares_line(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets) {
  if (outputs.rows() < 2 || outputs.rows() != targets.rows())
    throw std::invalid_argument("least_squares_line: need at least two paired rows");
  BiCParams p;
  for (int k = 0; k < 3; ++k) {
    const double mo = outputs.col(k).mean(), mt = targets.col(k).mean();
    const Eigen::ArrayXd co = outputs.col(k).array() - mo;
    const Eigen::ArrayXd ct = targets.col(k).array() - mt;
    const double sxx = (co * co).sum();
    if (!(sxx > 0.0)) throw std::invalid_argument("least_squares_line: constant outputs");
    p.alpha[k] = (co * ct).sum() / sxx;
    p.beta[k] = mt - p.alpha[k] * mo;
  }
  return p;
}

BiCParams bic_fit(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets,
                  const std::vector<bool>& is_old, const BiCFitOptions& options) {
  if (outputs.rows() == 0) throw BiCError("empty BiC validation pool");
  if (outputs.rows() != targets.rows() || std::size_t(outputs.rows()) != is_old.size() ||
      outputs.cols() != 3 || targets.cols() != 3)
    throw std::invalid_argument("bic_fit: shape mismatch");
  const auto old_count = std::count(is_old.begin(), is_old.end(), true);
  if (old_count == 0 || 2 * old_count != outputs.rows())
    throw BiCError("unbalanced BiC validation: pool needs equal old and new counts");

  const double n = double(outputs.rows());
  BiCParams p;
  for (int k = 0; k < 3; ++k) {
    // Hessian of the all-quadratic loss; it bounds the smooth-L1 curvature.
    Eigen::Matrix2d h;
    h(0, 0) = outputs.col(k).squaredNorm();
    h(0, 1) = h(1, 0) = outputs.col(k).sum();
    h(1, 1) = n;
    h /= 3.0 * n;
    h += Eigen::Matrix2d::Identity() * (1e-12 * (h.trace() + 1e-300));
    const Eigen::LDLT<Eigen::Matrix2d> solver(h);
    for (int it = 0; it < options.max_iterations; ++it) {
      const BiCLoss l = bic_loss(outputs, targets, p);
      const Eigen::Vector2d step = solver.solve(Eigen::Vector2d(l.grad_alpha[k], l.grad_beta[k]));
      p.alpha[k] -= step[0];
      p.beta[k] -= step[1];
      if (step.cwiseAbs().maxCoeff() < options.tolerance) break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------

std::vector<int> herd_exemplars(const Eigen::MatrixXd& features, int m) {
  const int n = static_cast<int>(features.rows());
  if (n == 0) throw std::invalid_argument("herd_exemplars: empty feature set");
  if (m < 1 || m > n) throw std::invalid_argument("herd_exemplars: budget must lie in [1, N]");
  const Eigen::RowVectorXd mu = features.colwise().mean();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(features.cols());
  std::vector<bool> taken(std::size_t(n), false);
  std::vector<int> picks;
  picks.reserve(std::size_t(m));
  for (int k = 0; k < m; ++k) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (taken[std::size_t(i)]) continue;
      const double d = (mu - (sum + features.row(i)) / double(k + 1)).squaredNorm();
      // Distances equal up to rounding count as ties.
      if (best < 0 || d < best_d - 1e-12 * std::max(1.0, best_d)) {
        best_d = d;
        best = i;
      }
    }
    taken[std::size_t(best)] = true;
    sum += features.row(best);
    picks.push_back(best);
  }
  return picks;
}

std::vector<int> herd_exemplars_binned(const Eigen::MatrixXd& features,
                                       const Eigen::VectorXd& bin_values, int bins, double lo,
                                       double hi, int m) {
  const int n = static_cast<int>(features.rows());
  if (n == 0) throw std::invalid_argument("herd_exemplars: empty feature set");
  if (bin_values.size() != n) throw std::invalid_argument("herd_exemplars_binned: one bin value per row");
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("herd_exemplars_binned: bad bin layout");
  if (m < 1 || m > n) throw std::invalid_argument("herd_exemplars: budget must lie in [1, N]");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(bins));
  for (int i = 0; i < n; ++i) {
    const int b = std::clamp(static_cast<int>(std::floor((bin_values[i] - lo) / (hi - lo) * bins)), 0, bins - 1);
    members[std::size_t(b)].push_back(i);
  }
  std::vector<std::vector<int>> orders(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    const auto& mem = members[std::size_t(b)];
    if (mem.empty()) continue;
    Eigen::MatrixXd f(Eigen::Index(mem.size()), features.cols());
    for (std::size_t j = 0; j < mem.size(); ++j) f.row(Eigen::Index(j)) = features.row(mem[j]);
    for (int local : herd_exemplars(f, static_cast<int>(mem.size())))
      orders[std::size_t(b)].push_back(mem[std::size_t(local)]);
  }
  std::vector<std::size_t> used(static_cast<std::size_t>(bins), 0);
  std::vector<int> picks;
  while (static_cast<int>(picks.size()) < m) {
    int best = -1;
    double best_frac = 2.0;
    for (int b = 0; b < bins; ++b) {
      const auto size = orders[std::size_t(b)].size();
      if (used[std::size_t(b)] >= size) continue;
      const double frac = double(used[std::size_t(b)]) / double(size);
      if (frac < best_frac) {
        best_frac = frac;
        best = b;
      }
    }
    picks.push_back(orders[std::size_t(best)][used[std::size_t(best)]++]);
  }
  return picks;
}

int exemplar_budget(double pct, int n) {
  if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("exemplar_pct must lie in [0, 100]");
  return static_cast<int>(std::lround(pct / 100.0 * double(n)));
}

ExemplarMemory build_memory(const LabeledSet& old_train, std::vector<int> order, double pct) {
  ExemplarMemory mem;
  mem.pct = pct;
  mem.old_train_size = old_train.size();
  const int budget = exemplar_budget(pct, old_train.size());
  if (budget > static_cast<int>(order.size()))
    throw std::invalid_argument("build_memory: herding order shorter than the budget");
  mem.order = std::move(order);
  mem.data = subset(old_train, std::vector<int>(mem.order.begin(), mem.order.begin() + budget),
                    old_train.id + "-exemplars");
  return mem;
}

std::vector<std::vector<int>> build_replay_stream(int new_count, int memory_count, int batch_size,
                                                  Rng& rng) {
  if (new_count < 0 || memory_count < 0) throw std::invalid_argument("build_replay_stream: negative count");
  if (batch_size < 1) throw std::invalid_argument("build_replay_stream: batch size must be >= 1");
  if (memory_count > 0 && batch_size < 2)
    throw std::invalid_argument("build_replay_stream: batch size must be >= 2 with exemplars");
  std::vector<int> pool(std::size_t(new_count + memory_count));
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(std::span<int>(pool));
  std::vector<std::vector<int>> batches;
  for (std::size_t b = 0; b < pool.size(); b += std::size_t(batch_size)) {
    const auto end = std::min(pool.size(), b + std::size_t(batch_size));
    batches.emplace_back(pool.begin() + std::ptrdiff_t(b), pool.begin() + std::ptrdiff_t(end));
  }
  return batches;
}

std::uint64_t parameter_hash(const nn::Network<float>& net) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : net.parameters()) {
    mix(p.name.data(), p.name.size());
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    mix(shape, sizeof shape);
    mix(p.value.data(), std::size_t(p.value.size()) * sizeof(float));
  }
  return h;
}

json IncrementalResult::checkpoint_extra() const {
  json extra = json::object();
  if (bic) extra["bic"] = bic->to_json();
  return extra;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> herding_order(const nn::Network<float>& base, const LabeledSet& old_train,
                               const StrategyConfig& s, int workers) {
  const Eigen::MatrixXd feats = nn::infer(base, old_train, workers).features;
  const int n = old_train.size();
  if (s.herding == HerdingMode::global) return herd_exemplars(feats, n);
  return herd_exemplars_binned(feats, old_train.targets.col(1), s.herding_bins, -1.0, 0.0, n);
}

}  // namespace

IncrementalResult train_incremental(const nn::Network<float>& base, const IncrementalData& data,
                                    const StrategyConfig& strategy, const nn::TrainConfig& train,
                                    Rng& rng,
                                    const std::function<void(const nn::EpochRecord&)>& on_epoch,
                                    int max_steps) {
  strategy.validate();
  if (strategy.kind == StrategyKind::lucir && base.arch().head != nn::HeadKind::cosine)
    throw StrategyMismatch("strategy lucir requires a cosine head; base network has an " +
                           to_string(base.arch().head) + " head");
  if (data.new_train.empty()) throw std::invalid_argument("train_incremental: empty new training set");
  if (train.batch_size < 1) throw std::invalid_argument("train_incremental: batch size must be >= 1");
  const bool is_bic = strategy.kind == StrategyKind::bic;
  const bool wants_old = strategy.exemplar_pct > 0.0 || is_bic;
  if (wants_old && data.old_train.empty())
    throw std::invalid_argument("train_incremental: strategy " + to_string(strategy.kind) +
                                " needs old training data for exemplars");

  const TeacherSnapshot teacher(base);
  IncrementalResult result{base, {}, std::nullopt, {}, {}, teacher.hash(), true};
  auto& net = result.net;

  if (wants_old)
    result.memory = build_memory(data.old_train, herding_order(base, data.old_train, strategy, train.workers),
                                 strategy.exemplar_pct);
  else
    result.memory.pct = strategy.exemplar_pct;

  // BiC holds out part of the new data plus old records just past the budget.
  LabeledSet stage1_new = data.new_train;
  LabeledSet bic_val;
  std::vector<bool> bic_is_old;
  if (is_bic) {
    const int n_new = data.new_train.size();
    const int hold = static_cast<int>(std::lround(strategy.bic_val_fraction * n_new));
    const int spare = static_cast<int>(result.memory.order.size()) - result.memory.budget();
    const int k = std::min(hold, spare);
    if (k < 1 || hold >= n_new)
      throw BiCError("unbalanced BiC validation: no held-out old records beyond the exemplar budget");
    std::vector<int> perm(static_cast<std::size_t>(n_new));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    std::vector<int> held(perm.begin(), perm.begin() + hold);
    std::vector<int> kept(perm.begin() + hold, perm.end());
    std::sort(held.begin(), held.end());
    std::sort(kept.begin(), kept.end());
    held.resize(std::size_t(k));
    stage1_new = subset(data.new_train, kept, data.new_train.id + "-stage1");
    const auto& order = result.memory.order;
    std::vector<int> old_held(order.begin() + result.memory.budget(),
                              order.begin() + result.memory.budget() + k);
    bic_val = concat(subset(data.old_train, old_held, "bic-old"),
                     subset(data.new_train, held, "bic-new"), "bic-val");
    bic_is_old.assign(std::size_t(k), true);
    bic_is_old.resize(std::size_t(2 * k), false);
  }

  const int n_new = stage1_new.size();
  const int n_mem = result.memory.budget();
  const LabeledSet pool = n_mem > 0 ? concat(stage1_new, result.memory.data, "replay") : stage1_new;

  auto& opt = result.optimizer;
  opt.lr = train.lr;
  opt.momentum = train.momentum;

  const bool distill = strategy.distills_outputs();
  const bool lucir = strategy.kind == StrategyKind::lucir;
  const float lambda0 = static_cast<float>(strategy.lambda0);
  const float lambda_dist = static_cast<float>(strategy.lambda_dist);
  int steps = 0;
  bool stop = false;
  for (int e = 0; e < train.epochs && !stop; ++e) {
    const auto batches = build_replay_stream(n_new, n_mem, train.batch_size, rng);
    nn::EpochRecord rec;
    rec.epoch = ++opt.epoch;
    rec.lr = opt.lr;
    double sum_total = 0.0, sum_new = 0.0, sum_distill = 0.0;
    int count = 0;
    for (const auto& idx : batches) {
      const auto x = nn::gather_batch(pool, idx);
      nn::Matrix<float> target(Eigen::Index(idx.size()), 3);
      for (std::size_t r = 0; r < idx.size(); ++r)
        target.row(Eigen::Index(r)) = pool.targets.row(idx[r]).cast<float>();
      const auto pass = net.forward(x);
      nn::Matrix<float> d_out;
      nn::Matrix<float> d_feat;
      double total = 0.0, fresh = 0.0, dist = 0.0;
      if (lucir) {
        const auto t = teacher.forward(x);
        const auto l = lucir_loss<float>(pass.outputs, target, pass.features, t.features, lambda_dist);
        d_out = l.grad_pred;
        d_feat = l.grad_features;
        total = l.value;
        fresh = l.new_term;
        dist = l.distill_term;
      } else if (distill) {
        const auto t = teacher.forward(x);
        std::vector<Eigen::Index> rows;
        for (std::size_t r = 0; r < idx.size(); ++r)
          if (strategy.distill_on_exemplars || idx[r] < n_new) rows.push_back(Eigen::Index(r));
        if (rows.size() == idx.size()) {
          const auto l = lwf_loss<float>(pass.outputs, target, pass.outputs, t.outputs, lambda0);
          d_out = l.grad_new + l.grad_cur;
          total = l.value;
          fresh = l.new_term;
          dist = l.distill_term;
        } else {
          nn::Matrix<float> cur(Eigen::Index(rows.size()), 3), teach(Eigen::Index(rows.size()), 3);
          for (std::size_t j = 0; j < rows.size(); ++j) {
            cur.row(Eigen::Index(j)) = pass.outputs.row(rows[j]);
            teach.row(Eigen::Index(j)) = t.outputs.row(rows[j]);
          }
          const auto l = lwf_loss<float>(pass.outputs, target, cur, teach, lambda0);
          d_out = l.grad_new;
          for (std::size_t j = 0; j < rows.size(); ++j) d_out.row(rows[j]) += l.grad_cur.row(Eigen::Index(j));
          total = l.value;
          fresh = l.new_term;
          dist = l.distill_term;
        }
      } else {
        const auto l = nn::smooth_l1<float>(pass.outputs, target);
        d_out = l.grad;
        total = fresh = l.value;
      }
      net.backward(pass, d_out, d_feat.size() ? &d_feat : nullptr);
      nn::sgd_step(net, opt);
      sum_total += total;
      sum_new += fresh;
      sum_distill += dist;
      ++count;
      if (max_steps > 0 && ++steps >= max_steps) {
        stop = true;
        break;
      }
    }
    rec.train_loss = sum_total / count;
    rec.loss_new = sum_new / count;
    rec.loss_distill = sum_distill / count;
    if (!data.old_val.empty()) rec.val_mu_mse_old = nn::mu_mse(nn::predict(net, data.old_val, train.workers), data.old_val.targets);
    if (!data.new_val.empty()) {
      rec.val_mu_mse_new = nn::mu_mse(nn::predict(net, data.new_val, train.workers), data.new_val.targets);
      nn::plateau_update(opt, *rec.val_mu_mse_new);
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (is_bic)
    result.bic = bic_fit(nn::predict(net, bic_val, train.workers), bic_val.targets, bic_is_old);
  result.teacher_unchanged = teacher.unchanged();
  return result;
}

}  // namespace calibfw
