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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "calibfw/camera_geometry.hpp"
#include "calibfw/dataset.hpp"
#include "calibfw/eval.hpp"
#include "calibfw/incremental.hpp"
#include "calibfw/nn/checkpoint.hpp"
#include "calibfw/nn/grad_check.hpp"
#include "calibfw/nn/optimizer.hpp"
#include "calibfw/nn/training.hpp"
#include "calibfw/panorama.hpp"
#include "test_util.hpp"

namespace calibfw {
namespace {

namespace fs = std::filesystem;
using nn::HeadKind;
using nn::Matrix;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

nn::Tensor<double> random_batch(int n, int size, Rng& rng) {
  nn::Tensor<double> x(n, 3, size, size);
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values.data()[i] = rng.normal();
  return x;
}

LabeledSet random_set(int n, int size, Rng& rng, const std::string& id) {
  LabeledSet s;
  s.id = id;
  s.image_size = size;
  s.images.resize(Eigen::Index(n) * size * size, 3);
  for (Eigen::Index i = 0; i < s.images.size(); ++i) s.images.data()[i] = float(rng.normal());
  s.targets.resize(n, 3);
  for (int i = 0; i < n; ++i)
    s.targets.row(i) << rng.uniform(0.1, 1.0), rng.uniform(-1.0, 0.0), rng.uniform(-1.0, 1.0);
  return s;
}

template <typename Scalar>
nn::Network<Scalar> make_net(const std::string& arch, HeadKind head, int size, std::uint64_t seed) {
  nn::Network<Scalar> net(nn::arch_preset(arch, head, size));
  Rng rng(seed);
  net.initialize(rng);
  return net;
}

Matrix<double> uniform_matrix(int rows, int cols, Rng& rng) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// ---------------------------------------------------------------------------

Outcome geometry_closure() {
  constexpr int size = 256;
  int checked = 0, skipped = 0;
  double worst = 0;
  for (const auto style : {PanoramaStyle::indoor_like, PanoramaStyle::outdoor_like}) {
    const Panorama pano = synth_panorama(style == PanoramaStyle::indoor_like ? 11 : 12, style);
    for (double f : {60.0, 150.0, 300.0, 450.0})
      for (double pitch : {-5.0, -15.0, -30.0, -45.0}) {
        const double bp = horizon_midpoint(f, deg_to_rad(pitch), size);
        if (std::abs(bp) >= 1.0) {
          ++skipped;
          continue;
        }
        const double expected = image_units_to_row(bp, size);
        for (double yaw : {0.0, 137.0}) {
          const double got = measure_horizon_row(render_crop(pano, make_crop_spec(f, pitch, 0, yaw, size)));
          worst = std::max(worst, std::abs(got - expected));
          ++checked;
        }
      }
  }
  return {checked > 0 && worst <= 1.0,
          fmt("%d renders, %d grid points out of frame, max |row error| %.3f px", checked, skipped / 2,
              worst)};
}

Outcome gradient_fidelity() {
  constexpr int size = 32;
  constexpr double eps = 1e-5;
  constexpr int coords = 400;
  Rng rng(5);
  const auto x = random_batch(2, size, rng);
  const Matrix<double> y = 0.5 * uniform_matrix(2, 3, rng);
  std::map<std::string, nn::GradCheckResult> results;

  auto affine = make_net<double>("calibnet-tiny", HeadKind::affine, size, 1);
  results["smooth-l1"] = nn::grad_check(
      affine, x,
      [&](const nn::ForwardPass<double>& p) {
        const auto l = nn::smooth_l1<double>(p.outputs, y);
        return nn::NetObjective{l.value, l.grad, {}};
      },
      eps, coords);

  const auto teacher = make_net<double>("calibnet-tiny", HeadKind::affine, size, 2);
  const Matrix<double> teach_out = teacher.forward(x).outputs;
  results["lwf"] = nn::grad_check(
      affine, x,
      [&](const nn::ForwardPass<double>& p) {
        const auto l = lwf_loss<double>(p.outputs, y, p.outputs, teach_out, 1.0);
        return nn::NetObjective{l.value, Matrix<double>(l.grad_new + l.grad_cur), {}};
      },
      eps, coords);

  auto cosine = make_net<double>("calibnet-tiny", HeadKind::cosine, size, 3);
  const auto cos_teacher = make_net<double>("calibnet-tiny", HeadKind::cosine, size, 4);
  const Matrix<double> teach_feat = cos_teacher.forward(x).features;
  results["lucir"] = nn::grad_check(
      cosine, x,
      [&](const nn::ForwardPass<double>& p) {
        const auto l = lucir_loss<double>(p.outputs, y, p.features, teach_feat, 1.0);
        return nn::NetObjective{l.value, l.grad_pred, l.grad_features};
      },
      eps, coords);

  // Stage two: alpha and beta over frozen outputs.
  const Eigen::MatrixXd frozen = affine.forward(random_batch(24, size, rng)).outputs;
  Eigen::MatrixXd targets(24, 3);
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets.data()[i] = 2 * rng.normal();
  nn::Parameter<double> alpha{"alpha", Matrix<double>(3, 1), Matrix<double>(3, 1)};
  nn::Parameter<double> beta{"beta", Matrix<double>(3, 1), Matrix<double>(3, 1)};
  alpha.value << 1.3, 0.6, -0.8;
  beta.value << 0.2, -0.1, 0.4;
  auto current = [&] {
    BiCParams p;
    p.alpha = alpha.value.col(0);
    p.beta = beta.value.col(0);
    return p;
  };
  std::vector<nn::Parameter<double>*> params{&alpha, &beta};
  Rng pick(1);
  results["bic"] = nn::grad_check(
      params, [&] { return bic_loss(frozen, targets, current()).value; },
      [&] {
        const auto l = bic_loss(frozen, targets, current());
        alpha.grad = l.grad_alpha;
        beta.grad = l.grad_beta;
      },
      eps, 0, pick);

  bool ok = true;
  std::string detail;
  for (const auto& [name, r] : results) {
    ok = ok && r.max_rel_error < 1e-4;
    detail += fmt("%s%s %.2e (%d coords)", detail.empty() ? "" : ", ", name.c_str(), r.max_rel_error,
                  r.coordinates);
  }
  return {ok, detail};
}

Outcome strategy_equivalences() {
  Rng rng(21);
  const LabeledSet old_train = random_set(48, 32, rng, "old-train"), old_val = random_set(12, 32, rng, "old-val");
  const LabeledSet new_train = random_set(48, 32, rng, "new-train"), new_val = random_set(12, 32, rng, "new-val");
  const auto base = make_net<float>("calibnet-tiny", HeadKind::affine, 32, 8);
  nn::TrainConfig train;
  train.epochs = 3;
  train.batch_size = 8;
  TempDir dir("calibfw-accept");

  auto run = [&](StrategyKind kind, double lambda0, const std::string& name) {
    StrategyConfig s;
    s.kind = kind;
    s.lambda0 = lambda0;
    Rng seeded(99);
    const auto r = train_incremental(base, {old_train, old_val, new_train, new_val}, s, train, seeded, {}, 5);
    nn::save_checkpoint(dir / name, r.net, r.optimizer, seeded.state(), r.checkpoint_extra());
    return testing::read_file(dir / name);
  };
  const std::string finetune = run(StrategyKind::finetune, 1.0, "finetune.ckpt");
  const std::string lwf0 = run(StrategyKind::lwf, 0.0, "lwf0.ckpt");
  const std::string lwf = run(StrategyKind::lwf, 1.0, "lwf.ckpt");
  const std::string icarl0 = run(StrategyKind::icarl, 1.0, "icarl0.ckpt");
  const std::string moved = testing::read_file([&] {
    nn::save_checkpoint(dir / "base.ckpt", base, {});
    return dir / "base.ckpt";
  }());
  const bool a = finetune == lwf0, b = lwf == icarl0;
  return {a && b && finetune != lwf,
          fmt("finetune==lwf(0): %s, lwf==icarl(0%%): %s, lwf differs from finetune: %s", a ? "yes" : "no",
              b ? "yes" : "no", finetune != lwf ? "yes" : "no") +
              (moved == finetune ? " (weights did not move)" : "")};
}

std::vector<int> brute_force_herding(const Eigen::MatrixXd& f, int m) {
  const Eigen::RowVectorXd mu = f.colwise().mean();
  std::vector<int> picked;
  std::vector<bool> used(std::size_t(f.rows()), false);
  for (int k = 0; k < m; ++k) {
    int best = -1;
    double best_d = 0;
    for (int i = 0; i < f.rows(); ++i) {
      if (used[std::size_t(i)]) continue;
      Eigen::RowVectorXd s = f.row(i);
      for (int j : picked) s += f.row(j);
      const double d = (mu - s / double(k + 1)).squaredNorm();
      if (best < 0 || d < best_d - 1e-12 * std::max(1.0, best_d)) {
        best = i;
        best_d = d;
      }
    }
    used[std::size_t(best)] = true;
    picked.push_back(best);
  }
  return picked;
}

Outcome herding_oracle() {
  Rng rng(41);
  int instances = 0, mismatches = 0, prefix_failures = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + int(rng.uniform_int(15)), f = 1 + int(rng.uniform_int(8));
    Eigen::MatrixXd feats(n, f);
    for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.normal();
    const int m_max = std::min(n, 8);
    const auto full = herd_exemplars(feats, n);
    for (int m = 1; m <= m_max; ++m) {
      const auto got = herd_exemplars(feats, m);
      mismatches += got != brute_force_herding(feats, m);
      prefix_failures += !std::equal(got.begin(), got.end(), full.begin());
    }
    ++instances;
  }
  return {instances >= 50 && mismatches == 0 && prefix_failures == 0,
          fmt("%d instances, %d oracle mismatches, %d prefix failures", instances, mismatches,
              prefix_failures)};
}

Outcome bic_oracle() {
  const auto net = make_net<float>("calibnet-tiny", HeadKind::affine, 32, 13);
  Rng rng(17);
  const LabeledSet images = random_set(200, 32, rng, "bic");
  const Eigen::MatrixXd o = nn::predict(net, images);
  const Eigen::Vector3d a_true(0.8, 1.2, 0.5), b_true(0.05, -0.1, 0.2);
  Eigen::MatrixXd y(o.rows(), 3);
  for (Eigen::Index i = 0; i < o.rows(); ++i)
    for (int k = 0; k < 3; ++k) y(i, k) = a_true[k] * o(i, k) + b_true[k] + 0.05 * rng.normal();
  std::vector<bool> is_old(std::size_t(o.rows()));
  for (std::size_t i = 0; i < is_old.size(); ++i) is_old[i] = i % 2 == 0;

  const BiCParams fit = bic_fit(o, y, is_old);
  double worst = 0, max_residual = 0;
  for (int k = 0; k < 3; ++k) {
    const double mo = o.col(k).mean(), my = y.col(k).mean();
    const double cov = ((o.col(k).array() - mo) * (y.col(k).array() - my)).sum();
    const double var = (o.col(k).array() - mo).square().sum();
    const double alpha = cov / var, beta = my - alpha * mo;
    worst = std::max({worst, std::abs(fit.alpha[k] - alpha), std::abs(fit.beta[k] - beta)});
    max_residual =
        std::max(max_residual, (y.col(k).array() - alpha * o.col(k).array() - beta).abs().maxCoeff());
  }
  return {worst < 1e-3 && max_residual < 1.0,
          fmt("max |fit - closed form| %.2e, max residual %.3f", worst, max_residual)};
}

Outcome loss_unit_values() {
  const Matrix<double> zero = Matrix<double>::Zero(1, 1);
  auto one = [](double v) { return Matrix<double>::Constant(1, 1, v); };
  const bool smooth = nn::smooth_l1<double>(zero, zero).value == 0.0 &&
                      nn::smooth_l1<double>(one(0.5), zero).value == 0.125 &&
                      nn::smooth_l1<double>(one(2.0), zero).value == 1.5;

  Matrix<double> f(1, 3), par(1, 3), orth(1, 3), anti(1, 3);
  f << 1.0, 2.0, -0.5;
  par = 3.0 * f;
  orth << 2.0, -1.0, 0.0;
  anti = -0.25 * f;
  const double lp = less_forget<double>(f, par).value, lo = less_forget<double>(f, orth).value,
               la = less_forget<double>(f, anti).value;
  const bool lucir = std::abs(lp) <= 1e-12 && std::abs(lo - 1) <= 1e-12 && std::abs(la - 2) <= 1e-12;

  Rng rng(3);
  Matrix<double> feats(6, 8), w(8, 3);
  for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  nn::RowVector<double> raw(3);
  raw << 0.3, -0.2, 1.1;
  const auto base = nn::cosine_head_forward<double>(feats, w, raw);
  double drift = 0;
  for (double c : {1e-3, 0.5, 7.0, 1e4})
    drift = std::max(drift,
                     (nn::cosine_head_forward<double>(Matrix<double>(c * feats), w, raw) - base).cwiseAbs().maxCoeff());
  return {smooth && lucir && drift <= 1e-6,
          fmt("smooth-L1 %s, less-forget {%.1e, %.12f, %.12f}, cosine scale drift %.1e",
              smooth ? "exact" : "WRONG", lp, lo, la, drift)};
}

// ---------------------------------------------------------------------------

struct Domains {
  LabeledSet in_train, in_val, in_test, out_train, out_val, out_test;
};

Domains make_domains(std::uint64_t seed, const fs::path& root) {
  auto build = [&](PanoramaStyle style, std::uint64_t base, const char* name, LabeledSet& tr,
                   LabeledSet& va, LabeledSet& te) {
    std::vector<Panorama> panos;
    for (int i = 0; i < 16; ++i) panos.push_back(synth_panorama(seed * 1000 + base + std::uint64_t(i), style));
    DatasetConfig cfg;
    cfg.sampler.seed = seed * 10 + base;
    cfg.count = 2000;
    cfg.test_count = 400;
    const auto m = generate_dataset(panos, cfg, root / name);
    tr = load_split(m, Split::train);
    va = load_split(m, Split::val);
    te = load_split(m, Split::test);
  };
  Domains d;
  build(PanoramaStyle::indoor_like, 0, "indoor", d.in_train, d.in_val, d.in_test);
  build(PanoramaStyle::outdoor_like, 500, "outdoor", d.out_train, d.out_val, d.out_test);
  return d;
}

struct SeedResult {
  double in_on_in = 0, in_on_out = 0, out_on_out = 0, out_on_in = 0;
  double finetune_old = 0, lwf_old = 0;
  std::map<int, double> sweep_old;
  std::map<int, double> sweep_new;
  double finetune_new = 0;
};

SeedResult forgetting_run(std::uint64_t seed) {
  TempDir dir("calibfw-forget");
  const Domains d = make_domains(seed, dir.path());
  const nn::TrainConfig train;  // 10 epochs, batch 16, lr 0.003

  auto fit_base = [&](const LabeledSet& tr, const LabeledSet& va) {
    nn::Network<float> net(nn::arch_preset("calibnet-tiny"));
    Rng rng(seed);
    net.initialize(rng);
    nn::OptimizerState state;
    state.lr = train.lr;
    nn::train_network(net, state, rng, tr, va, train);
    return net;
  };
  auto err = [](const nn::Network<float>& net, const LabeledSet& s) {
    return nn::mu_mse(nn::predict(net, s), s.targets);
  };

  SeedResult r;
  const auto indoor = fit_base(d.in_train, d.in_val);
  const auto outdoor = fit_base(d.out_train, d.out_val);
  r.in_on_in = err(indoor, d.in_test);
  r.in_on_out = err(indoor, d.out_test);
  r.out_on_out = err(outdoor, d.out_test);
  r.out_on_in = err(outdoor, d.in_test);

  const IncrementalData data{d.in_train, d.in_val, d.out_train, d.out_val};
  StrategyConfig finetune;
  Rng ft_rng(seed);
  const auto ft = train_incremental(indoor, data, finetune, train, ft_rng);
  r.finetune_old = err(ft.net, d.in_test);
  r.finetune_new = err(ft.net, d.out_test);

  StrategyConfig icarl;
  icarl.kind = StrategyKind::icarl;
  const SweepSetup setup{indoor, data, d.in_test, d.out_test};
  const auto sweep = exemplar_sweep(setup, {0, 20, 50, 100}, icarl, train, seed);
  for (const auto& row : sweep.rows) {
    r.sweep_old[int(row.pct)] = row.mu_mse_old;
    r.sweep_new[int(row.pct)] = row.mu_mse_new;
  }
  // iCaRL with no exemplars is LwF.
  r.lwf_old = r.sweep_old.at(0);
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome forgetting_experiment() {
  std::vector<SeedResult> runs;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t0 = std::chrono::steady_clock::now();
    runs.push_back(forgetting_run(seed));
    const auto& r = runs.back();
    std::printf(
        "  seed %llu: base in/in %.4f in/out %.4f out/out %.4f out/in %.4f | old-domain finetune %.4f "
        "lwf %.4f icarl20 %.4f icarl50 %.4f icarl100 %.4f | new-domain finetune %.4f icarl100 %.4f "
        "[%.0f s]\n",
        static_cast<unsigned long long>(seed), r.in_on_in, r.in_on_out, r.out_on_out, r.out_on_in,
        r.finetune_old, r.lwf_old, r.sweep_old.at(20), r.sweep_old.at(50), r.sweep_old.at(100),
        r.finetune_new, r.sweep_new.at(100),
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::fflush(stdout);
  }
  auto med = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    return median(v);
  };
  const double in_in = med([](auto& r) { return r.in_on_in; });
  const double in_out = med([](auto& r) { return r.in_on_out; });
  const double out_out = med([](auto& r) { return r.out_on_out; });
  const double out_in = med([](auto& r) { return r.out_on_in; });
  const double ft = med([](auto& r) { return r.finetune_old; });
  const double lwf = med([](auto& r) { return r.lwf_old; });
  std::map<int, double> sweep;
  for (int pct : {0, 20, 50, 100}) sweep[pct] = med([&](auto& r) { return r.sweep_old.at(pct); });

  const bool a = in_in < in_out && out_out < out_in;
  const bool b = lwf < ft;
  const bool c = sweep[20] <= lwf;
  const bool dd = std::all_of(sweep.begin(), sweep.end(), [&](const auto& kv) { return sweep[100] <= kv.second; });
  return {a && b && c && dd,
          fmt("(a) %s in %.4f<%.4f out %.4f<%.4f; (b) %s lwf %.4f < finetune %.4f; (c) %s icarl20 %.4f <= "
              "lwf; (d) %s sweep 0/20/50/100 = %.4f/%.4f/%.4f/%.4f",
              a ? "ok" : "FAIL", in_in, in_out, out_out, out_in, b ? "ok" : "FAIL", lwf, ft,
              c ? "ok" : "FAIL", sweep[20], dd ? "ok" : "FAIL", sweep[0], sweep[20], sweep[50], sweep[100])};
}

// ---------------------------------------------------------------------------

std::string quote(const std::string& s) { return "'" + s + "'"; }

bool run_cli(const std::string& args) {
  const std::string cmd = quote(CALIBFW_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

Outcome determinism() {
  TempDir dir("calibfw-determinism");
  const fs::path panos = dir / "panos";
  if (!run_cli("gen-panos --count 4 --height 64 --seed 3 --deterministic --out " + quote(panos.string())))
    return {false, "gen-panos failed"};
  std::vector<std::string> manifests, checkpoints;
  int runs = 0;
  for (int workers : {1, 4})
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path data = dir / fmt("data_w%d_%d", workers, rep);
      const fs::path ckpt = dir / fmt("model_w%d_%d.ckpt", workers, rep);
      const std::string w = " --workers " + std::to_string(workers);
      if (!run_cli("gen-dataset --panos " + quote(panos.string()) + " --count 120 --size 32 --seed 5 " +
                   "--deterministic" + w + " --out " + quote(data.string())))
        return {false, "gen-dataset failed"};
      if (!run_cli("train --data " + quote(data.string()) + " --epochs 2 --seed 6 --deterministic" + w +
                   " --out " + quote(ckpt.string())))
        return {false, "train failed"};
      manifests.push_back(testing::read_file(data / kManifestFileName));
      checkpoints.push_back(testing::read_file(ckpt));
      ++runs;
    }
  const bool m = std::all_of(manifests.begin(), manifests.end(), [&](auto& s) { return s == manifests[0]; });
  const bool c = std::all_of(checkpoints.begin(), checkpoints.end(), [&](auto& s) { return s == checkpoints[0]; });
  return {m && c && !manifests[0].empty() && !checkpoints[0].empty(),
          fmt("%d runs over workers {1,4}: manifests %s, checkpoints %s", runs, m ? "identical" : "DIFFER",
              c ? "identical" : "DIFFER")};
}

Outcome scheduler() {
  nn::OptimizerState state;
  const double start = state.lr;
  std::vector<int> reductions;
  std::string lrs;
  int epoch = 0;
  for (double metric : {1.0, 1.0, 1.0}) {
    ++epoch;
    if (nn::plateau_update(state, metric)) reductions.push_back(epoch);
    lrs += fmt("%s%g", lrs.empty() ? "" : ", ", state.lr);
  }
  const bool ok = start == 0.003 && reductions == std::vector<int>{3} && std::abs(state.lr - 0.0003) < 1e-15;
  return {ok, fmt("lr after each epoch: %s; reductions at epoch %s", lrs.c_str(),
                  reductions.empty() ? "none" : std::to_string(reductions[0]).c_str())};
}

}  // namespace
}  // namespace calibfw

int main() {
  using namespace calibfw;
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
    double time_limit_s = 0;  // 0: unbounded
  };
  const std::vector<Criterion> criteria{
      {"geometry closure", geometry_closure, 30},
      {"gradient fidelity", gradient_fidelity, 120},
      {"strategy equivalences", strategy_equivalences},
      {"herding oracle", herding_oracle},
      {"bias-correction oracle", bic_oracle},
      {"loss unit values", loss_unit_values},
      {"forgetting experiment", forgetting_experiment},
      {"determinism", determinism},
      {"lr scheduler", scheduler},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (criteria[i].time_limit_s > 0 && secs >= criteria[i].time_limit_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s limit", criteria[i].time_limit_s);
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
