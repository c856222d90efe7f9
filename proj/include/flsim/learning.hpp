// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flsim/common.hpp"
#include "flsim/dataset.hpp"

namespace flsim {

enum class ModelKind { logistic, mlp1 };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

struct ModelDims {
  int input_dim = 784;
  int num_classes = 10;
  int hidden = 0;  // mlp1 only

  bool operator==(const ModelDims&) const = default;
};

/// Length of the flat parameter vector.
///   logistic: W (D x C, column-major) then b (C)          -> (D + 1) C
///   mlp1:     W1 (D x H), b1 (H), W2 (H x C), b2 (C)     -> (D + 1) H + (H + 1) C
std::size_t num_params(ModelKind kind, const ModelDims& dims);

struct ModelParams {
  ModelKind kind = ModelKind::logistic;
  ModelDims dims;
  VectorXd values;

  void validate() const;
  /// Exact, element-wise comparison.
  bool operator==(const ModelParams& other) const;
};

struct Hyperparams {
  double learning_rate = 0.01;
  int batch_size = 10;
  int local_epochs = 5;

  void validate(int max_local_epochs) const;
  bool operator==(const Hyperparams&) const = default;
};

struct ModelUpdate {
  ClientId client_id = 0;
  ModelParams new_params;
  std::int64_t num_samples = 0;
  double train_loss = 0.0;
  std::int64_t payload_bits = 0;
  int quant_bits = 32;
};

/// Bits on the wire for a vector of `count` values at `bits` precision. Below
/// 32 bits the per-vector 32-bit scale is included.
std::int64_t payload_bits_for(std::size_t count, int bits);

ModelParams init_model(ModelKind kind, const ModelDims& dims, std::uint64_t seed);

namespace detail {

template <typename Scalar>
Matrix<Scalar> softmax_rows(Matrix<Scalar> logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return logits;
}

// Mean cross-entropy from logits; the row max is subtracted before the
// log-sum-exp.
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, std::span<const int> labels) {
  Scalar total(0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<Scalar>(logits.rows());
}

}  // namespace detail

/// Logits (n x C) for a batch of rows.
template <typename Scalar>
Matrix<Scalar> forward(ModelKind kind, const ModelDims& dims, const Vector<Scalar>& params,
                       const RowMatrix<Scalar>& x) {
  const Eigen::Index d = dims.input_dim;
  const Eigen::Index c = dims.num_classes;
  if (kind == ModelKind::logistic) {
    Eigen::Map<const Matrix<Scalar>> w(params.data(), d, c);
    auto b = params.segment(d * c, c);
    Matrix<Scalar> logits = x * w;
    logits.rowwise() += b.transpose();
    return logits;
  }
  const Eigen::Index h = dims.hidden;
  Eigen::Map<const Matrix<Scalar>> w1(params.data(), d, h);
  auto b1 = params.segment(d * h, h);
  Eigen::Map<const Matrix<Scalar>> w2(params.data() + d * h + h, h, c);
  auto b2 = params.segment(d * h + h + h * c, c);
  Matrix<Scalar> z1 = x * w1;
  z1.rowwise() += b1.transpose();
  Matrix<Scalar> a = z1.array().tanh().matrix();
  Matrix<Scalar> logits = a * w2;
  logits.rowwise() += b2.transpose();
  return logits;
}

/// Mean softmax cross-entropy over the batch; writes the exact analytic
/// gradient into `grad` when it is non-null.
template <typename Scalar>
Scalar loss_and_gradient(ModelKind kind, const ModelDims& dims, const Vector<Scalar>& params,
                         const RowMatrix<Scalar>& x, std::span<const int> labels,
                         Vector<Scalar>* grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = dims.input_dim;
  const Eigen::Index c = dims.num_classes;

  // Hidden activations are needed for the backward pass, so mlp1 repeats the
  // forward computation inline instead of calling forward().
  Matrix<Scalar> act;
  Matrix<Scalar> logits;
  if (kind == ModelKind::logistic) {
    logits = forward<Scalar>(kind, dims, params, x);
  } else {
    const Eigen::Index h = dims.hidden;
    Eigen::Map<const Matrix<Scalar>> w1(params.data(), d, h);
    Eigen::Map<const Matrix<Scalar>> w2(params.data() + d * h + h, h, c);
    Matrix<Scalar> z1 = x * w1;
    z1.rowwise() += params.segment(d * h, h).transpose();
    act = z1.array().tanh().matrix();
    logits = act * w2;
    logits.rowwise() += params.segment(d * h + h + h * c, c).transpose();
  }
  const Scalar loss = detail::cross_entropy<Scalar>(logits, labels);
  if (grad == nullptr) return loss;

  // dL/dlogits = (softmax - onehot) / n
  Matrix<Scalar> g = detail::softmax_rows<Scalar>(logits);
  for (Eigen::Index i = 0; i < n; ++i) g(i, labels[static_cast<std::size_t>(i)]) -= Scalar(1);
  g /= static_cast<Scalar>(n);

  grad->resize(params.size());
  if (kind == ModelKind::logistic) {
    Eigen::Map<Matrix<Scalar>> dw(grad->data(), d, c);
    dw.noalias() = x.transpose() * g;
    grad->segment(d * c, c) = g.colwise().sum().transpose();
    return loss;
  }
  const Eigen::Index h = dims.hidden;
  Eigen::Map<const Matrix<Scalar>> w2(params.data() + d * h + h, h, c);
  Eigen::Map<Matrix<Scalar>> dw1(grad->data(), d, h);
  Eigen::Map<Matrix<Scalar>> dw2(grad->data() + d * h + h, h, c);
  dw2.noalias() = act.transpose() * g;
  grad->segment(d * h + h + h * c, c) = g.colwise().sum().transpose();
  Matrix<Scalar> dz1 =
      ((g * w2.transpose()).array() * (Scalar(1) - act.array().square())).matrix();
  dw1.noalias() = x.transpose() * dz1;
  grad->segment(d * h, h) = dz1.colwise().sum().transpose();
  return loss;
}

/// Gradient of the mean cross-entropy over `batch` (indices into `data`).
VectorXd gradient(const ModelParams& params, const LabeledDataset& data,
                  std::span<const std::size_t> batch);

/// Mini-batch SGD for hyper.local_epochs passes over the shard. Each epoch
/// visits the shard in a fresh order drawn from (seed, epoch); the trailing
/// partial batch is kept. train_loss is the sample-weighted mean batch loss
/// of the last epoch. `round_idx` only labels divergence errors.
ModelUpdate local_train(const ModelParams& params, const ClientShard& shard,
                        const LabeledDataset& data, const Hyperparams& hyper,
                        std::uint64_t seed, int round_idx = -1);

/// Symmetric uniform per-vector quantization followed by dequantization.
/// bits = 32 is the identity.
ModelUpdate quantize_roundtrip(const ModelUpdate& update, int bits);

/// Quantization step max|v| / (2^(bits-1) - 1); zero for an all-zero vector.
double quantization_step(const VectorXd& values, int bits);

struct FilterResult {
  std::vector<ModelUpdate> kept;
  std::vector<ModelUpdate> discarded;
};

/// Drops updates whose ||new - global||_2 exceeds multiplier x median norm.
/// At least two updates (the smallest-norm ones) always survive when two or
/// more were given. Input order is preserved in both outputs.
FilterResult filter_updates(const std::vector<ModelUpdate>& updates, const ModelParams& global,
                            double multiplier = 3.0);

/// Sample-count weighted coordinate-wise mean.
ModelParams fedavg(const std::vector<ModelUpdate>& updates);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// Argmax accuracy (ties to the lowest class id) and mean cross-entropy.
EvalResult evaluate(const ModelParams& params, const LabeledDataset& test_set);

// Checkpoint: "FLSM", u32 version, u32 kind, u32 D, u32 C, u32 H, u64 count,
// then count little-endian IEEE-754 doubles.
std::string serialize_params(const ModelParams& params);
ModelParams deserialize_params(std::string_view bytes);

}  // namespace flsim
