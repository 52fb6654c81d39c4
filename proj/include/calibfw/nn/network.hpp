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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "calibfw/nn/tensor.hpp"
#include "calibfw/rng.hpp"

namespace calibfw::nn {

enum class HeadKind { affine, cosine };
enum class FeatureActivation { identity, tanh };

std::string to_string(HeadKind head);
HeadKind parse_head(std::string_view name);
std::string to_string(FeatureActivation act);
FeatureActivation parse_feature_activation(std::string_view name);

/// Backbone and head layout. Conv blocks are 3x3 same-padding convolutions
/// followed by ReLU and 2x2 max-pooling; then global average pooling, one
/// fully connected feature layer and the 3-output head.
struct ArchConfig {
  std::string name = "calibnet-tiny";
  int input_size = 64;
  int input_channels = 3;
  std::vector<int> conv_channels{16, 32, 64};
  int feature_dim = 64;
  FeatureActivation feature_activation = FeatureActivation::tanh;
  HeadKind head = HeadKind::affine;

  void validate() const;
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

/// Named architectures: "calibnet-tiny" (16/32/64 channels, 64 features),
/// "calibnet-micro" (4/8/8 channels, 8 features) and "linear" (no convs,
/// identity feature layer). Throws std::invalid_argument listing the valid
/// names for anything else.
ArchConfig arch_preset(std::string_view name, HeadKind head = HeadKind::affine,
                       int input_size = 64);
std::vector<std::string> arch_names();

class DegenerateFeature : public std::runtime_error {
 public:
  DegenerateFeature() : std::runtime_error("degenerate feature: zero-norm vector in cosine head") {}
};

template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(20) ? x : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Cosine-normalized head: out(n, k) = eta_k * <w_k / |w_k|, f_n / |f_n|>.
/// `weight` is F x 3 (column k is w_k); eta = softplus(raw_scale).
template <typename Scalar>
Matrix<Scalar> cosine_head_forward(const Matrix<Scalar>& features, const Matrix<Scalar>& weight,
                                   const RowVector<Scalar>& raw_scale) {
  Matrix<Scalar> out(features.rows(), weight.cols());
  for (Eigen::Index k = 0; k < weight.cols(); ++k) {
    const Scalar wn = weight.col(k).norm();
    if (!(wn > Scalar(0))) throw DegenerateFeature();
    const Scalar eta = softplus(raw_scale(k));
    for (Eigen::Index n = 0; n < features.rows(); ++n) {
      const Scalar fn = features.row(n).norm();
      if (!(fn > Scalar(0))) throw DegenerateFeature();
      out(n, k) = eta * features.row(n).dot(weight.col(k).transpose()) / (fn * wn);
    }
  }
  return out;
}

/// Activations and cache of one forward pass.
template <typename Scalar>
struct ForwardPass {
  /// batch x 3, columns (focal, pitch, roll).
  Matrix<Scalar> outputs;
  /// batch x F, the penultimate activation f(x).
  Matrix<Scalar> features;

  std::vector<Tensor<Scalar>> conv_inputs;
  std::vector<Tensor<Scalar>> conv_outputs;  // after ReLU, before pooling
  std::vector<std::vector<int>> pool_argmax;
  Tensor<Scalar> pooled_map;  // input of the global average pool
  Matrix<Scalar> pooled;      // batch x C
  Matrix<Scalar> fc_pre;      // batch x F, before the feature activation
  bool has_cache = false;

  int batch() const { return static_cast<int>(outputs.rows()); }
};

namespace detail {

/// colT(k, c*9 + ky*3 + kx) = x(k shifted by (ky-1, kx-1), c), zero outside.
template <typename Scalar, typename In>
void im2col(const In& x, int h, int w, Matrix<Scalar>& colT) {
  const int channels = static_cast<int>(x.cols());
  colT.resize(Eigen::Index(h) * w, Eigen::Index(channels) * 9);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = colT.col(Eigen::Index(c) * 9 + ky * 3 + kx).data();
        const Scalar* src = x.col(c).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          Scalar* drow = dst + Eigen::Index(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + w, Scalar(0));
            continue;
          }
          const Scalar* srow = src + Eigen::Index(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            drow[xx] = (sx < 0 || sx >= w) ? Scalar(0) : srow[sx];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: accumulates colT back into dx.
template <typename Scalar, typename Out>
void col2im_add(const Matrix<Scalar>& colT, int h, int w, Out&& dx) {
  const int channels = static_cast<int>(dx.cols());
  for (int c = 0; c < channels; ++c) {
    Scalar* dst = dx.col(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = colT.col(Eigen::Index(c) * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const Scalar* srow = src + Eigen::Index(y) * w;
          Scalar* drow = dst + Eigen::Index(sy) * w;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - 1;
            if (sx >= 0 && sx < w) drow[sx] += srow[xx];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Calibration regression network. All per-sample arithmetic is done one
/// sample at a time, so a sample's outputs do not depend on which batch it is
/// evaluated in.
template <typename Scalar>
class Network {
 public:
  static constexpr int kOutputs = 3;

  explicit Network(ArchConfig arch) : arch_(std::move(arch)) {
    arch_.validate();
    int in = arch_.input_channels;
    for (std::size_t l = 0; l < arch_.conv_channels.size(); ++l) {
      const int out = arch_.conv_channels[l];
      add("conv" + std::to_string(l) + ".weight", 9 * in, out);
      add("conv" + std::to_string(l) + ".bias", 1, out);
      in = out;
    }
    add("fc.weight", in, arch_.feature_dim);
    add("fc.bias", 1, arch_.feature_dim);
    add("head.weight", arch_.feature_dim, kOutputs);
    add(arch_.head == HeadKind::cosine ? "head.scale_raw" : "head.bias", 1, kOutputs);
    if (arch_.head == HeadKind::cosine)
      params_.back().value.setConstant(std::log(std::expm1(Scalar(1))));
  }

  /// He-style fan-in initialization: N(0, 2/fan_in) for ReLU convs and
  /// N(0, 1/fan_in) for the feature layer and head. Biases start at zero and
  /// the cosine scale at eta = 1.
  void initialize(Rng& rng) {
    for (auto& p : params_) {
      const bool is_weight = p.name.ends_with(".weight");
      if (!is_weight) continue;
      const double fan_in = double(p.value.rows());
      const double gain = p.name.starts_with("conv") ? 2.0 : 1.0;
      const double stddev = std::sqrt(gain / fan_in);
      for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
          p.value(i, j) = Scalar(stddev * rng.normal());
    }
  }

  const ArchConfig& arch() const { return arch_; }
  std::vector<Parameter<Scalar>>& parameters() { return params_; }
  const std::vector<Parameter<Scalar>>& parameters() const { return params_; }

  Parameter<Scalar>& parameter(std::string_view name) {
    for (auto& p : params_)
      if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + std::string(name));
  }
  const Parameter<Scalar>& parameter(std::string_view name) const {
    return const_cast<Network*>(this)->parameter(name);
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  ForwardPass<Scalar> forward(const Tensor<Scalar>& x) const {
    if (x.channels != arch_.input_channels || x.height != arch_.input_size ||
        x.width != arch_.input_size)
      throw std::invalid_argument(
          "forward: input is " + std::to_string(x.channels) + "x" + std::to_string(x.height) +
          "x" + std::to_string(x.width) + ", network expects " +
          std::to_string(arch_.input_channels) + "x" + std::to_string(arch_.input_size) + "x" +
          std::to_string(arch_.input_size));
    if (x.batch < 1) throw std::invalid_argument("forward: empty batch");
    const int batch = x.batch;
    const std::size_t layers = arch_.conv_channels.size();

    ForwardPass<Scalar> pass;
    Tensor<Scalar> cur = x;
    Matrix<Scalar> colT;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& wt = params_[2 * l].value;
      const auto& b = params_[2 * l + 1].value;
      const int h = cur.height, w = cur.width, cout = arch_.conv_channels[l];
      Tensor<Scalar> act(batch, cout, h, w);
      for (int n = 0; n < batch; ++n) {
        detail::im2col(cur.sample(n), h, w, colT);
        auto y = act.sample(n);
        y.noalias() = colT * wt;
        y.rowwise() += b.row(0);
        y = y.cwiseMax(Scalar(0));
      }
      // 2x2 max pool, first maximum wins.
      const int ph = h / 2, pw = w / 2;
      Tensor<Scalar> pooled(batch, cout, ph, pw);
      std::vector<int> argmax(std::size_t(batch) * cout * ph * pw);
      for (int n = 0; n < batch; ++n) {
        const auto src = act.sample(n);
        auto dst = pooled.sample(n);
        for (int c = 0; c < cout; ++c) {
          for (int py = 0; py < ph; ++py) {
            for (int px = 0; px < pw; ++px) {
              int best = (2 * py) * w + 2 * px;
              for (int k : {(2 * py) * w + 2 * px + 1, (2 * py + 1) * w + 2 * px,
                            (2 * py + 1) * w + 2 * px + 1})
                if (src(k, c) > src(best, c)) best = k;
              dst(py * pw + px, c) = src(best, c);
              argmax[((std::size_t(n) * cout + c) * ph + py) * pw + px] = best;
            }
          }
        }
      }
      pass.conv_inputs.push_back(std::move(cur));
      pass.conv_outputs.push_back(std::move(act));
      pass.pool_argmax.push_back(std::move(argmax));
      cur = std::move(pooled);
    }

    const int channels = cur.channels;
    pass.pooled.resize(batch, channels);
    for (int n = 0; n < batch; ++n)
      pass.pooled.row(n) = cur.sample(n).colwise().sum() / Scalar(cur.spatial());
    pass.pooled_map = std::move(cur);

    const auto& fc_w = params_[2 * layers].value;
    const auto& fc_b = params_[2 * layers + 1].value;
    pass.fc_pre.resize(batch, arch_.feature_dim);
    for (int n = 0; n < batch; ++n)
      pass.fc_pre.row(n).noalias() = pass.pooled.row(n) * fc_w + fc_b.row(0);
    pass.features = arch_.feature_activation == FeatureActivation::tanh
                        ? Matrix<Scalar>(pass.fc_pre.array().tanh())
                        : pass.fc_pre;

    const auto& head_w = params_[2 * layers + 2].value;
    const auto& head_b = params_[2 * layers + 3].value;
    if (arch_.head == HeadKind::cosine) {
      pass.outputs = cosine_head_forward<Scalar>(pass.features, head_w, head_b.row(0));
    } else {
      pass.outputs.resize(batch, kOutputs);
      for (int n = 0; n < batch; ++n)
        pass.outputs.row(n).noalias() = pass.features.row(n) * head_w + head_b.row(0);
    }
    pass.has_cache = true;
    return pass;
  }

  /// Reverse-mode pass. Overwrites every parameter gradient with
  /// d(loss)/d(param), given d(loss)/d(outputs) and, optionally, an extra
  /// d(loss)/d(features) for losses defined on the feature tap.
  void backward(const ForwardPass<Scalar>& pass, const Matrix<Scalar>& d_outputs,
                const Matrix<Scalar>* d_features = nullptr) {
    if (!pass.has_cache) throw std::logic_error("backward: forward cache missing");
    const int batch = pass.batch();
    if (d_outputs.rows() != batch || d_outputs.cols() != kOutputs)
      throw std::invalid_argument("backward: d_outputs shape does not match the forward pass");
    if (d_features && (d_features->rows() != batch || d_features->cols() != arch_.feature_dim))
      throw std::invalid_argument("backward: d_features shape does not match the forward pass");
    zero_grad();
    const std::size_t layers = arch_.conv_channels.size();

    auto& head_w = params_[2 * layers + 2];
    auto& head_b = params_[2 * layers + 3];
    Matrix<Scalar> d_feat = d_features ? *d_features : Matrix<Scalar>::Zero(batch, arch_.feature_dim);
    if (arch_.head == HeadKind::cosine) {
      for (int k = 0; k < kOutputs; ++k) {
        const auto wk = head_w.value.col(k);
        const Scalar wn = wk.norm();
        const Scalar eta = softplus(head_b.value(0, k));
        const Scalar deta = sigmoid(head_b.value(0, k));
        for (int n = 0; n < batch; ++n) {
          const auto f = pass.features.row(n);
          const Scalar fn = f.norm();
          const Scalar cosv = f.dot(wk.transpose()) / (fn * wn);
          const Scalar g = d_outputs(n, k);
          head_w.grad.col(k) += g * eta / wn * (f.transpose() / fn - cosv * wk / wn);
          d_feat.row(n) += g * eta / fn * (wk.transpose() / wn - cosv * f / fn);
          head_b.grad(0, k) += g * cosv * deta;
        }
      }
    } else {
      for (int n = 0; n < batch; ++n) {
        head_w.grad.noalias() += pass.features.row(n).transpose() * d_outputs.row(n);
        head_b.grad += d_outputs.row(n);
        d_feat.row(n).noalias() += d_outputs.row(n) * head_w.value.transpose();
      }
    }

    Matrix<Scalar> d_pre = d_feat;
    if (arch_.feature_activation == FeatureActivation::tanh)
      d_pre.array() *= Scalar(1) - pass.features.array().square();

    auto& fc_w = params_[2 * layers];
    auto& fc_b = params_[2 * layers + 1];
    Matrix<Scalar> d_pooled(batch, fc_w.value.rows());
    for (int n = 0; n < batch; ++n) {
      fc_w.grad.noalias() += pass.pooled.row(n).transpose() * d_pre.row(n);
      fc_b.grad += d_pre.row(n);
      d_pooled.row(n).noalias() = d_pre.row(n) * fc_w.value.transpose();
    }
    if (layers == 0) return;

    // Global average pool.
    const auto& pm = pass.pooled_map;
    Tensor<Scalar> d_map(batch, pm.channels, pm.height, pm.width);
    for (int n = 0; n < batch; ++n)
      d_map.sample(n).rowwise() = d_pooled.row(n) / Scalar(pm.spatial());

    Matrix<Scalar> colT, d_colT;
    for (std::size_t li = layers; li-- > 0;) {
      const auto& act = pass.conv_outputs[li];
      const auto& input = pass.conv_inputs[li];
      const auto& argmax = pass.pool_argmax[li];
      auto& wt = params_[2 * li];
      auto& b = params_[2 * li + 1];
      const int cout = act.channels, h = act.height, w = act.width;
      const int ph = h / 2, pw = w / 2;

      Tensor<Scalar> d_input;
      if (li > 0) d_input = Tensor<Scalar>(batch, input.channels, h, w);
      Matrix<Scalar> d_act(act.spatial(), cout);
      for (int n = 0; n < batch; ++n) {
        d_act.setZero();
        const auto dsrc = d_map.sample(n);
        for (int c = 0; c < cout; ++c)
          for (int k = 0; k < ph * pw; ++k)
            d_act(argmax[(std::size_t(n) * cout + c) * ph * pw + k], c) += dsrc(k, c);
        // ReLU: pass gradient where the activation was positive.
        d_act = (act.sample(n).array() > Scalar(0)).select(d_act.array(), Scalar(0)).matrix();

        detail::im2col(input.sample(n), h, w, colT);
        wt.grad.noalias() += colT.transpose() * d_act;
        b.grad += d_act.colwise().sum();
        if (li > 0) {
          d_colT.noalias() = d_act * wt.value.transpose();
          detail::col2im_add(d_colT, h, w, d_input.sample(n));
        }
      }
      if (li > 0) d_map = std::move(d_input);
    }
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(arch_);
    for (std::size_t i = 0; i < params_.size(); ++i)
      out.parameters()[i].value = params_[i].value.template cast<Other>();
    return out;
  }

 private:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    params_.push_back({std::move(name), Matrix<Scalar>::Zero(rows, cols),
                       Matrix<Scalar>::Zero(rows, cols)});
  }

  ArchConfig arch_;
  std::vector<Parameter<Scalar>> params_;
};

}  // namespace calibfw::nn
