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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "flsim/common.hpp"

namespace flsim {

/// Single-label classification data held in memory, one row per sample.
struct LabeledDataset {
  RowMatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  int feature_dim() const { return static_cast<int>(features.cols()); }
  std::size_t size() const { return labels.size(); }

  /// Throws ConsistencyError if rows/labels disagree, a label is out of
  /// range, or a feature is not finite.
  void validate() const;

  bool operator==(const LabeledDataset& other) const;
};

struct ClientShard {
  ClientId client_id = 0;
  std::vector<std::size_t> sample_indices;
  CountVector class_histogram;

  std::size_t size() const { return sample_indices.size(); }
  bool operator==(const ClientShard& other) const;
};

struct PartitionConfig {
  int num_clients = 15;
  double alpha = 0.1;
  int min_samples_per_client = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSpec {
  int num_classes = 10;
  int samples_per_class = 100;
  int feature_dim = 784;
  /// Standard deviation of the per-class mean vectors. Sample noise has unit
  /// variance, so this sets how separable the classes are.
  double separation = 1.0;
};

// IDX (big-endian; images magic 2051, labels magic 2049). Pixels map to [0,1]
// by dividing by 255.
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

LabeledDataset load_idx(std::istream& images, std::istream& labels);
LabeledDataset load_idx_files(const std::filesystem::path& images,
                              const std::filesystem::path& labels);

/// Encodes features as IDX bytes. Values are clamped to [0,1] and rounded to
/// the nearest 1/255 step; the image shape is written as 1 x feature_dim.
std::string write_idx_images(const LabeledDataset& data);
std::string write_idx_labels(const LabeledDataset& data);

/// Rounds every feature onto the IDX byte grid (clamp to [0,1], nearest k/255).
LabeledDataset to_byte_grid(LabeledDataset data);

/// Gaussian class clusters. Class means depend only on `seed`; `sample_label`
/// selects an independent noise substream so train and test splits share
/// their means.
LabeledDataset synth_dataset(const SyntheticSpec& spec, std::uint64_t seed,
                             std::string_view sample_label = "train");
LabeledDataset synth_dataset(int num_classes, int samples_per_class, int feature_dim,
                             std::uint64_t seed);

/// Seeded subsample of `size` rows, kept in original order. size >= rows
/// returns the input unchanged.
LabeledDataset subsample(const LabeledDataset& data, std::size_t size, std::uint64_t seed);

/// Per-class Dirichlet(alpha) split across clients, followed by the
/// min-samples repair. Result is ordered by client id.
std::vector<ClientShard> dirichlet_partition(const LabeledDataset& data,
                                             const PartitionConfig& cfg);

CountVector class_histogram(const ClientShard& shard, const LabeledDataset& data);

/// Shannon entropy of a count vector, in bits. Zero for an empty histogram.
double label_entropy(const CountVector& histogram);

/// Mean of label_entropy over shards.
double mean_client_entropy(const std::vector<ClientShard>& shards);

}  // namespace flsim
