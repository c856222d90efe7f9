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
#include <optional>
#include <string>
#include <vector>

#include "flsim/common.hpp"
#include "flsim/control_plane.hpp"
#include "flsim/dataset.hpp"
#include "flsim/learning.hpp"
#include "flsim/wireless.hpp"

namespace flsim {

enum class DatasetSource { idx, synthetic };

/// Where training and test data come from. The test split is never
/// partitioned; it stays with the server.
struct DataConfig {
  DatasetSource source = DatasetSource::idx;
  std::string data_dir;  // empty: --data-dir flag, then FLSIM_DATA_DIR, then "."
  std::string train_images = "train-images-idx3-ubyte";
  std::string train_labels = "train-labels-idx1-ubyte";
  std::string test_images = "t10k-images-idx3-ubyte";
  std::string test_labels = "t10k-labels-idx1-ubyte";
  std::size_t subsample_size = 0;  // 0: full training split
  SyntheticSpec synthetic{10, 600, 784, 0.12};
  int synthetic_test_per_class = 100;
  std::uint64_t data_seed = 7;
};

struct SimConfig {
  PartitionConfig partition;
  WirelessConfig wireless;
  ModelKind model_kind = ModelKind::logistic;
  int hidden_units = 64;
  Hyperparams hyper;
  int max_local_epochs = 10;
  int rounds = 10;
  Policy policy = Policy::class_diversity;
  std::optional<int> k;
  int quant_bits = 32;
  double filter_multiplier = 3.0;
  double plateau_epsilon = 0.002;
  int patience = 2;
  double latency_budget_s = 1.0;
  double compute_speed_min = 500.0;
  double compute_speed_max = 5000.0;
  std::int64_t coverage_threshold = 1;
  double unit_reward = 1.0;
  std::uint64_t master_seed = 1;
  DataConfig data;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
  ControlConfig control() const;
};

struct ReportSummary {
  double final_accuracy = 0.0;
  double mean_selected_snr_db = 0.0;
  double mean_round_comm_latency_s = 0.0;
  double mean_round_compute_latency_s = 0.0;
  std::int64_t total_payload_bits = 0;

  bool operator==(const ReportSummary&) const = default;
};

struct SimulationReport {
  SimConfig config;
  double initial_accuracy = 0.0;
  double initial_loss = 0.0;
  std::vector<RoundRecord> rounds;
  ReportSummary summary;
  bool aborted = false;
  double wall_time_s = 0.0;
};

/// Recomputes the summary from the per-round records.
ReportSummary summarize(double initial_accuracy, const std::vector<RoundRecord>& rounds);

/// Thrown when local training diverges; carries the rounds completed so far.
class SimulationAborted : public DivergenceError {
 public:
  SimulationAborted(const DivergenceError& cause, SimulationReport partial)
      : DivergenceError(cause), partial_(std::move(partial)) {}
  const SimulationReport& partial() const { return partial_; }

 private:
  SimulationReport partial_;
};

/// Partition, compute speeds and radio setup for one seed.
World make_world(const SimConfig& cfg, const LabeledDataset& train);

/// Exactly cfg.rounds rounds of telemetry -> plan -> schedule -> train ->
/// dropout -> quantize -> uplink -> filter -> aggregate -> evaluate ->
/// remember. Every random draw is keyed by (master_seed, purpose, round,
/// client), so the policy cannot influence the environment.
SimulationReport run_simulation(const SimConfig& cfg, const LabeledDataset& train,
                                const LabeledDataset& test, const Planner& planner);
SimulationReport run_simulation(const SimConfig& cfg, const LabeledDataset& train,
                                const LabeledDataset& test);

struct ComparisonRow {
  Policy policy = Policy::random;
  std::uint64_t seed = 0;
  int num_channels = 0;
  double avg_selected_snr_db = 0.0;
  double avg_comm_latency_s = 0.0;
  double final_test_accuracy = 0.0;
};

struct PolicyAggregate {
  Policy policy = Policy::random;
  int num_channels = 0;
  std::size_t runs = 0;
  double mean_snr_db = 0.0;
  double mean_comm_latency_s = 0.0;
  double mean_final_accuracy = 0.0;
  double median_snr_db = 0.0;
  double median_comm_latency_s = 0.0;
  double median_final_accuracy = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;          // ordered by (policy, seed, K)
  std::vector<PolicyAggregate> aggregates;  // ordered by (policy, K)
  std::vector<SimulationReport> runs;       // parallel to rows
};

/// One run per (policy, seed, channel count) on identical data. An empty
/// `channels` list means the configured channel count. Runs execute on up to
/// `max_threads` threads (0: hardware concurrency); output order does not
/// depend on scheduling.
ComparisonReport run_comparison(const SimConfig& cfg, const std::vector<Policy>& policies,
                                const std::vector<std::uint64_t>& seeds,
                                const std::vector<int>& channels, const LabeledDataset& train,
                                const LabeledDataset& test, unsigned max_threads = 0);

double median(std::vector<double> values);

/// Re-runs the embedded config and throws ReproducibilityError naming the
/// first field (as a JSON pointer) where the fresh report differs. Wall time
/// is ignored.
SimulationReport replay(const SimulationReport& recorded, const LabeledDataset& train,
                        const LabeledDataset& test);

}  // namespace flsim
