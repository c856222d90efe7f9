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

#include "flsim/learning.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <numeric>

#include "flsim/rng.hpp"

namespace flsim {

namespace {

RowMatrixXd gather_rows(const LabeledDataset& data, std::span<const std::size_t> idx,
                        std::vector<int>& labels) {
  RowMatrixXd x(static_cast<Eigen::Index>(idx.size()), data.features.cols());
  labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(idx[i]));
    labels[i] = data.labels[idx[i]];
  }
  return x;
}

void check_dims(const ModelParams& params, const LabeledDataset& data) {
  if (params.dims.input_dim != data.feature_dim() ||
      params.dims.num_classes < data.num_classes) {
    throw ConsistencyError("model dims (" + std::to_string(params.dims.input_dim) + ", " +
                           std::to_string(params.dims.num_classes) +
                           ") do not match dataset (" + std::to_string(data.feature_dim()) +
                           ", " + std::to_string(data.num_classes) + ")");
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t& pos, int width) {
  if (pos + static_cast<std::size_t>(width) > bytes.size()) {
    throw IoError("truncated checkpoint");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= std::uint64_t{static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)])}
         << (8 * i);
  }
  pos += static_cast<std::size_t>(width);
  return v;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::logistic ? "logistic" : "mlp1";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "logistic") return ModelKind::logistic;
  if (name == "mlp1") return ModelKind::mlp1;
  throw DomainError("unknown model kind '" + std::string(name) + "'");
}

std::size_t num_params(ModelKind kind, const ModelDims& dims) {
  const auto d = static_cast<std::size_t>(dims.input_dim);
  const auto c = static_cast<std::size_t>(dims.num_classes);
  if (kind == ModelKind::logistic) return (d + 1) * c;
  const auto h = static_cast<std::size_t>(dims.hidden);
  return (d + 1) * h + (h + 1) * c;
}

void ModelParams::validate() const {
  if (dims.input_dim <= 0 || dims.num_classes <= 0 ||
      (kind == ModelKind::mlp1 && dims.hidden <= 0)) {
    throw ConsistencyError("invalid model dimensions");
  }
  if (static_cast<std::size_t>(values.size()) != num_params(kind, dims)) {
    throw ConsistencyError("parameter vector length " + std::to_string(values.size()) +
                           " != expected " + std::to_string(num_params(kind, dims)));
  }
  if (!values.allFinite()) throw ConsistencyError("non-finite model parameter");
}

bool ModelParams::operator==(const ModelParams& other) const {
  return kind == other.kind && dims == other.dims && values.size() == other.values.size() &&
         std::memcmp(values.data(), other.values.data(),
                     static_cast<std::size_t>(values.size()) * sizeof(double)) == 0;
}

void Hyperparams::validate(int max_local_epochs) const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (local_epochs < 1) throw DomainError("local_epochs must be >= 1");
  if (local_epochs > max_local_epochs) throw DomainError("local_epochs exceeds cap");
}

std::int64_t payload_bits_for(std::size_t count, int bits) {
  const auto base = static_cast<std::int64_t>(count) * bits;
  return bits < 32 ? base + 32 : base;
}

ModelParams init_model(ModelKind kind, const ModelDims& dims, std::uint64_t seed) {
  ModelParams p{kind, dims, VectorXd::Zero(static_cast<Eigen::Index>(num_params(kind, dims)))};
  if (kind == ModelKind::logistic) return p;

  rng::Stream stream(seed, rng::labels::kInit);
  const Eigen::Index d = dims.input_dim;
  const Eigen::Index h = dims.hidden;
  const Eigen::Index c = dims.num_classes;
  const double a1 = std::sqrt(6.0 / static_cast<double>(d + h));
  const double a2 = std::sqrt(6.0 / static_cast<double>(h + c));
  for (Eigen::Index i = 0; i < d * h; ++i) p.values(i) = stream.uniform(-a1, a1);
  for (Eigen::Index i = 0; i < h * c; ++i) p.values(d * h + h + i) = stream.uniform(-a2, a2);
  return p;
}

VectorXd gradient(const ModelParams& params, const LabeledDataset& data,
                  std::span<const std::size_t> batch) {
  if (batch.empty()) throw DomainError("gradient of an empty batch");
  check_dims(params, data);
  std::vector<int> labels;
  const RowMatrixXd x = gather_rows(data, batch, labels);
  VectorXd grad;
  loss_and_gradient<double>(params.kind, params.dims, params.values, x, labels, &grad);
  return grad;
}

ModelUpdate local_train(const ModelParams& params, const ClientShard& shard,
                        const LabeledDataset& data, const Hyperparams& hyper,
                        std::uint64_t seed, int round_idx) {
  if (shard.sample_indices.empty()) throw DomainError("local_train on an empty shard");
  if (hyper.batch_size < 1 || hyper.local_epochs < 1 || !(hyper.learning_rate >= 0.0)) {
    throw DomainError("invalid hyperparameters");
  }
  check_dims(params, data);

  ModelParams current = params;
  std::vector<std::size_t> order = shard.sample_indices;
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  std::vector<int> labels;
  VectorXd grad;
  double last_epoch_loss = 0.0;
  long step = 0;

  for (int epoch = 0; epoch < hyper.local_epochs; ++epoch) {
    rng::Stream shuffle(seed, rng::labels::kShuffle, static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(order);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      const std::size_t len = std::min(batch, order.size() - start);
      const RowMatrixXd x =
          gather_rows(data, std::span<const std::size_t>(order).subspan(start, len), labels);
      const double loss = loss_and_gradient<double>(current.kind, current.dims,
                                                    current.values, x, labels, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw DivergenceError("non-finite loss in local training (client " +
                                  std::to_string(shard.client_id) + ", round " +
                                  std::to_string(round_idx) + ", batch " +
                                  std::to_string(step) + ")",
                              round_idx, step);
      }
      weighted += loss * static_cast<double>(len);
      current.values -= hyper.learning_rate * grad;
    }
    last_epoch_loss = weighted / static_cast<double>(order.size());
  }

  ModelUpdate update;
  update.client_id = shard.client_id;
  update.num_samples = static_cast<std::int64_t>(shard.size());
  update.train_loss = last_epoch_loss;
  update.quant_bits = 32;
  update.payload_bits = payload_bits_for(static_cast<std::size_t>(current.values.size()), 32);
  update.new_params = std::move(current);
  return update;
}

double quantization_step(const VectorXd& values, int bits) {
  const double max_abs = values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff();
  return max_abs / static_cast<double>((std::int64_t{1} << (bits - 1)) - 1);
}

ModelUpdate quantize_roundtrip(const ModelUpdate& update, int bits) {
  if (bits != 32 && bits != 16 && bits != 8) {
    throw DomainError("quantization bits must be 32, 16 or 8");
  }
  ModelUpdate out = update;
  out.quant_bits = bits;
  out.payload_bits =
      payload_bits_for(static_cast<std::size_t>(update.new_params.values.size()), bits);
  if (bits == 32) return out;

  const double step = quantization_step(update.new_params.values, bits);
  if (step == 0.0) return out;
  out.new_params.values =
      update.new_params.values.unaryExpr([step](double v) { return std::round(v / step) * step; });
  return out;
}

FilterResult filter_updates(const std::vector<ModelUpdate>& updates, const ModelParams& global,
                            double multiplier) {
  if (!(multiplier > 0.0)) throw DomainError("filter multiplier must be > 0");
  FilterResult out;
  if (updates.size() <= 2) {
    out.kept = updates;
    return out;
  }

  std::vector<double> norms(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    norms[i] = (updates[i].new_params.values - global.values).norm();
  }
  std::vector<double> sorted = norms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double limit = multiplier * median;

  std::vector<bool> keep(updates.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    keep[i] = norms[i] <= limit;
    kept += keep[i] ? 1 : 0;
  }
  if (kept < 2) {
    std::vector<std::size_t> rank(updates.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    std::fill(keep.begin(), keep.end(), false);
    keep[rank[0]] = true;
    keep[rank[1]] = true;
  }
  for (std::size_t i = 0; i < updates.size(); ++i) {
    (keep[i] ? out.kept : out.discarded).push_back(updates[i]);
  }
  return out;
}

ModelParams fedavg(const std::vector<ModelUpdate>& updates) {
  if (updates.empty()) throw AggregationError("fedavg over no updates");
  std::int64_t total = 0;
  for (const auto& u : updates) {
    if (u.num_samples < 0) throw AggregationError("negative sample count");
    if (u.new_params.values.size() != updates.front().new_params.values.size()) {
      throw AggregationError("update vectors differ in length");
    }
    total += u.num_samples;
  }
  if (total == 0) throw AggregationError("fedavg with zero total samples");

  ModelParams out = updates.front().new_params;
  out.values.setZero();
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.num_samples) / static_cast<double>(total);
    out.values += w * u.new_params.values;
  }
  return out;
}

EvalResult evaluate(const ModelParams& params, const LabeledDataset& test_set) {
  check_dims(params, test_set);
  if (test_set.size() == 0) return {};
  constexpr Eigen::Index kChunk = 2048;
  const Eigen::Index n = test_set.features.rows();
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    const RowMatrixXd x = test_set.features.middleRows(start, len);
    const MatrixXd logits = forward<double>(params.kind, params.dims, params.values, x);
    std::span<const int> labels(test_set.labels.data() + start, static_cast<std::size_t>(len));
    loss_sum += detail::cross_entropy<double>(logits, labels) * static_cast<double>(len);
    for (Eigen::Index i = 0; i < len; ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < logits.cols(); ++c) {
        if (logits(i, c) > logits(i, best)) best = c;
      }
      if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(n),
          loss_sum / static_cast<double>(n)};
}

std::string serialize_params(const ModelParams& params) {
  std::string out = "FLSM";
  put_u32(out, 1);
  put_u32(out, params.kind == ModelKind::logistic ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(params.dims.input_dim));
  put_u32(out, static_cast<std::uint32_t>(params.dims.num_classes));
  put_u32(out, static_cast<std::uint32_t>(params.dims.hidden));
  put_u64(out, static_cast<std::uint64_t>(params.values.size()));
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    put_u64(out, std::bit_cast<std::uint64_t>(params.values(i)));
  }
  return out;
}

ModelParams deserialize_params(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "FLSM") throw FormatError("bad checkpoint magic");
  std::size_t pos = 4;
  if (get_le(bytes, pos, 4) != 1) throw FormatError("unsupported checkpoint version");
  ModelParams p;
  const auto kind = get_le(bytes, pos, 4);
  if (kind > 1) throw FormatError("unknown model kind in checkpoint");
  p.kind = kind == 0 ? ModelKind::logistic : ModelKind::mlp1;
  p.dims.input_dim = static_cast<int>(get_le(bytes, pos, 4));
  p.dims.num_classes = static_cast<int>(get_le(bytes, pos, 4));
  p.dims.hidden = static_cast<int>(get_le(bytes, pos, 4));
  const auto count = get_le(bytes, pos, 8);
  if (count != num_params(p.kind, p.dims)) {
    throw ConsistencyError("checkpoint length does not match its header");
  }
  p.values.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < p.values.size(); ++i) {
    p.values(i) = std::bit_cast<double>(get_le(bytes, pos, 8));
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint");
  return p;
}

}  // namespace flsim
