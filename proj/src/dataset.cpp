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

#include "flsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>

#include "flsim/rng.hpp"

namespace flsim {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError(std::string("truncated IDX header in ") + what);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void append_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

unsigned char to_byte(double x) {
  const double clamped = std::clamp(x, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

void LabeledDataset::validate() const {
  if (num_classes <= 0) throw ConsistencyError("num_classes must be positive");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ConsistencyError("feature rows (" + std::to_string(features.rows()) +
                           ") != label count (" + std::to_string(labels.size()) + ")");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw ConsistencyError("label " + std::to_string(y) + " outside [0, " +
                             std::to_string(num_classes) + ")");
    }
  }
  if (!features.allFinite()) throw ConsistencyError("non-finite feature value");
}

bool LabeledDataset::operator==(const LabeledDataset& other) const {
  return num_classes == other.num_classes && labels == other.labels &&
         features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features;
}

bool ClientShard::operator==(const ClientShard& other) const {
  return client_id == other.client_id && sample_indices == other.sample_indices &&
         class_histogram.size() == other.class_histogram.size() &&
         class_histogram == other.class_histogram;
}

void PartitionConfig::validate() const {
  if (num_clients < 1) throw DomainError("num_clients must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be > 0");
  if (min_samples_per_client < 0) throw DomainError("min_samples_per_client must be >= 0");
}

LabeledDataset load_idx(std::istream& images, std::istream& labels) {
  const std::uint32_t img_magic = read_be32(images, "images");
  if (img_magic != kIdxImagesMagic) {
    throw FormatError("bad IDX images magic " + hex32(img_magic));
  }
  const std::uint32_t lbl_magic = read_be32(labels, "labels");
  if (lbl_magic != kIdxLabelsMagic) {
    throw FormatError("bad IDX labels magic " + hex32(lbl_magic));
  }

  const std::uint32_t n_images = read_be32(images, "images");
  const std::uint32_t rows = read_be32(images, "images");
  const std::uint32_t cols = read_be32(images, "images");
  const std::uint32_t n_labels = read_be32(labels, "labels");
  if (n_images != n_labels) {
    throw ConsistencyError("IDX image count " + std::to_string(n_images) +
                           " != label count " + std::to_string(n_labels));
  }

  const std::size_t dim = std::size_t{rows} * cols;
  LabeledDataset out;
  out.features.resize(n_images, static_cast<Eigen::Index>(dim));
  out.labels.resize(n_labels);

  std::vector<unsigned char> row(dim);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!images.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(dim))) {
      throw IoError("truncated IDX images payload at sample " + std::to_string(i));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      out.features(i, static_cast<Eigen::Index>(j)) = row[j] / 255.0;
    }
  }

  std::vector<unsigned char> raw(n_labels);
  if (!labels.read(reinterpret_cast<char*>(raw.data()),
                   static_cast<std::streamsize>(n_labels))) {
    throw IoError("truncated IDX labels payload");
  }
  int max_label = -1;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    out.labels[i] = raw[i];
    max_label = std::max(max_label, int{raw[i]});
  }
  out.num_classes = std::max(max_label + 1, 1);
  return out;
}

LabeledDataset load_idx_files(const std::filesystem::path& images,
                              const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw IoError("cannot open " + images.string());
  std::ifstream lbl(labels, std::ios::binary);
  if (!lbl) throw IoError("cannot open " + labels.string());
  return load_idx(img, lbl);
}

std::string write_idx_images(const LabeledDataset& data) {
  std::string out;
  out.reserve(16 + data.size() * static_cast<std::size_t>(data.feature_dim()));
  append_be32(out, kIdxImagesMagic);
  append_be32(out, static_cast<std::uint32_t>(data.size()));
  append_be32(out, 1);
  append_be32(out, static_cast<std::uint32_t>(data.feature_dim()));
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      out.push_back(static_cast<char>(to_byte(data.features(i, j))));
    }
  }
  return out;
}

std::string write_idx_labels(const LabeledDataset& data) {
  std::string out;
  append_be32(out, kIdxLabelsMagic);
  append_be32(out, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) out.push_back(static_cast<char>(static_cast<unsigned char>(y)));
  return out;
}

LabeledDataset to_byte_grid(LabeledDataset data) {
  data.features = data.features.unaryExpr([](double x) { return to_byte(x) / 255.0; });
  return data;
}

LabeledDataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                             std::string_view sample_label) {
  if (spec.num_classes <= 0 || spec.samples_per_class <= 0 || spec.feature_dim <= 0) {
    throw DomainError("synthetic dataset dimensions must be positive");
  }
  const Eigen::Index d = spec.feature_dim;
  LabeledDataset out;
  out.num_classes = spec.num_classes;
  out.features.resize(Eigen::Index{spec.num_classes} * spec.samples_per_class, d);
  out.labels.reserve(static_cast<std::size_t>(out.features.rows()));

  Eigen::Index row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    rng::Stream means(seed, rng::labels::kSynthMeans, static_cast<std::uint64_t>(c));
    VectorXd mean(d);
    for (Eigen::Index j = 0; j < d; ++j) mean(j) = spec.separation * means.normal();

    rng::Stream noise(seed, sample_label, static_cast<std::uint64_t>(c));
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) out.features(row, j) = mean(j) + noise.normal();
      out.labels.push_back(c);
    }
  }
  return out;
}

LabeledDataset synth_dataset(int num_classes, int samples_per_class, int feature_dim,
                             std::uint64_t seed) {
  return synth_dataset(SyntheticSpec{num_classes, samples_per_class, feature_dim, 1.0}, seed);
}

LabeledDataset subsample(const LabeledDataset& data, std::size_t size, std::uint64_t seed) {
  if (size >= data.size()) return data;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Stream stream(seed, rng::labels::kSubsample);
  stream.shuffle(idx);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());

  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.features.resize(static_cast<Eigen::Index>(size), data.features.cols());
  out.labels.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        data.features.row(static_cast<Eigen::Index>(idx[i]));
    out.labels[i] = data.labels[idx[i]];
  }
  return out;
}

CountVector class_histogram(const ClientShard& shard, const LabeledDataset& data) {
  CountVector hist = CountVector::Zero(data.num_classes);
  for (std::size_t i : shard.sample_indices) {
    if (i >= data.size()) {
      throw ConsistencyError("shard index " + std::to_string(i) + " out of range for " +
                             std::to_string(data.size()) + " samples");
    }
    ++hist(data.labels[i]);
  }
  return hist;
}

std::vector<ClientShard> dirichlet_partition(const LabeledDataset& data,
                                             const PartitionConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw InfeasiblePartitionError("empty dataset");
  const auto n_clients = static_cast<std::size_t>(cfg.num_clients);
  if (data.size() < n_clients * static_cast<std::size_t>(cfg.min_samples_per_client)) {
    throw InfeasiblePartitionError(
        std::to_string(data.size()) + " samples cannot give " +
        std::to_string(cfg.num_clients) + " clients at least " +
        std::to_string(cfg.min_samples_per_client) + " each");
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }

  std::vector<std::vector<std::size_t>> assigned(n_clients);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    rng::Stream shuffle(cfg.seed, rng::labels::kPartition, c, 0);
    shuffle.shuffle(idx);
    rng::Stream draw(cfg.seed, rng::labels::kPartition, c, 1);
    const std::vector<double> p = rng::dirichlet(draw, cfg.alpha, cfg.num_clients);

    const double n = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k < n_clients; ++k) {
      cum += p[k];
      std::size_t stop = k + 1 == n_clients
                             ? idx.size()
                             : std::min(idx.size(), static_cast<std::size_t>(cum * n));
      stop = std::max(stop, start);
      assigned[k].insert(assigned[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(stop));
      start = stop;
    }
  }

  // Repair: top up deficient clients one sample at a time from the largest.
  const auto min_size = static_cast<std::size_t>(cfg.min_samples_per_client);
  for (;;) {
    auto deficient = std::find_if(assigned.begin(), assigned.end(),
                                  [&](const auto& s) { return s.size() < min_size; });
    if (deficient == assigned.end()) break;
    auto largest = std::max_element(assigned.begin(), assigned.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    deficient->push_back(largest->back());
    largest->pop_back();
  }

  std::vector<ClientShard> shards(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) {
    shards[k].client_id = static_cast<ClientId>(k);
    shards[k].sample_indices = std::move(assigned[k]);
    shards[k].class_histogram = class_histogram(shards[k], data);
  }
  return shards;
}

double label_entropy(const CountVector& histogram) {
  const double total = static_cast<double>(histogram.sum());
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (Eigen::Index c = 0; c < histogram.size(); ++c) {
    if (histogram(c) > 0) {
      const double p = static_cast<double>(histogram(c)) / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

double mean_client_entropy(const std::vector<ClientShard>& shards) {
  if (shards.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : shards) sum += label_entropy(s.class_histogram);
  return sum / static_cast<double>(shards.size());
}

}  // namespace flsim
