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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flsim/common.hpp"
#include "flsim/dataset.hpp"
#include "flsim/learning.hpp"
#include "flsim/rng.hpp"
#include "flsim/wireless.hpp"

namespace flsim {

enum class Policy { random, latency, largest_data, class_diversity };

inline constexpr Policy kAllPolicies[] = {Policy::random, Policy::latency,
                                          Policy::largest_data, Policy::class_diversity};

std::string_view to_string(Policy policy);
Policy policy_from_string(std::string_view name);

struct ClientProfile {
  ClientId client_id = 0;
  std::int64_t num_samples = 0;
  CountVector class_histogram;
  double compute_speed = 1.0;  // samples per second
  double current_snr_db = 0.0;
  std::int64_t cumulative_participation = 0;
  double cumulative_reward = 0.0;

  bool operator==(const ClientProfile& other) const;
};

struct TelemetrySnapshot {
  int round_idx = 0;
  std::vector<ClientProfile> profiles;
  int num_channels = 0;
  double bandwidth_hz = 0.0;
  double global_accuracy_so_far = 0.0;

  bool operator==(const TelemetrySnapshot&) const = default;
};

struct RoundPlan {
  int round_idx = 0;
  Policy policy = Policy::random;
  std::vector<ClientId> selected_clients;
  Hyperparams hyper;
  int quant_bits = 32;
  int k = 0;

  bool operator==(const RoundPlan&) const = default;
};

struct Feedback {
  double accuracy_delta = 0.0;
  bool plateau = false;
  bool latency_over_budget = false;
  std::vector<std::string> notes;

  bool operator==(const Feedback&) const = default;
};

struct RoundMetrics {
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double mean_train_loss = 0.0;
  double avg_selected_snr_db = 0.0;
  double round_comm_latency_s = 0.0;
  double round_compute_latency_s = 0.0;

  bool operator==(const RoundMetrics&) const = default;
};

struct RoundRecord {
  RoundPlan plan;
  std::vector<std::vector<ClientId>> channel_queues;
  std::vector<LinkReport> link_reports;
  std::vector<ClientId> survivors;
  std::vector<ClientId> kept;
  std::vector<ClientId> discarded;
  bool no_update = false;
  std::int64_t uplink_payload_bits = 0;
  RoundMetrics metrics;
  Feedback feedback;
  /// Environment log: SNR and dropout draw for every client this round,
  /// whether or not it was selected.
  std::vector<double> env_snr_db;
  std::vector<bool> env_dropout;

  int round_idx() const { return plan.round_idx; }
};

/// Knobs the planner and evaluator read.
struct ControlConfig {
  Policy policy = Policy::class_diversity;
  std::optional<int> k;  // default: one client per channel
  Hyperparams hyper_defaults;
  int max_local_epochs = 10;
  int quant_bits = 32;
  double filter_multiplier = 3.0;
  double plateau_epsilon = 0.002;
  int patience = 2;
  double latency_budget_s = 1.0;
  std::int64_t coverage_threshold = 1;
  double unit_reward = 1.0;
  std::uint64_t seed = 0;  // selection substream
};

struct PolicyStats {
  std::size_t rounds = 0;
  double mean_test_accuracy = 0.0;
  double mean_comm_latency_s = 0.0;
  double mean_selected_snr_db = 0.0;
};

/// Append-only round history, ordered by round index. Each record's
/// serialized bytes are fingerprinted on append so later mutation is
/// detectable.
class MemoryStore {
 public:
  /// Throws ConsistencyError on a duplicate or out-of-order round index.
  void append(RoundRecord record);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<RoundRecord>& records() const { return records_; }
  const RoundRecord& back() const { return records_.back(); }

  std::span<const RoundRecord> last_n(std::size_t n) const;
  /// Round index with the highest test accuracy; earliest on ties.
  std::optional<int> best_round() const;
  std::map<Policy, PolicyStats> policy_stats() const;

  /// True when every record still serializes to its fingerprint at append.
  bool verify_integrity() const;

  /// One JSON object per line, LF terminated.
  std::string to_ndjson() const;
  static MemoryStore from_ndjson(std::string_view text);

  bool operator==(const MemoryStore& other) const;

 private:
  std::vector<RoundRecord> records_;
  std::vector<std::uint64_t> digests_;
};

/// State the retrieval step reads from: shards, fixed per-client compute
/// speeds and the radio configuration.
struct World {
  std::vector<ClientShard> shards;
  std::vector<double> compute_speed;
  WirelessConfig wireless;

  int num_clients() const { return static_cast<int>(shards.size()); }
};

TelemetrySnapshot collect_telemetry(const World& world, int round_idx, const MemoryStore& memory,
                                    double global_accuracy, double unit_reward = 1.0);

// Selection policies. All return distinct client ids, min(k, N) of them.

std::vector<ClientId> select_random(std::span<const ClientProfile> profiles, int k,
                                    rng::Stream& stream);
/// Top-k by current SNR, descending; ties to the lower id.
std::vector<ClientId> select_latency(std::span<const ClientProfile> profiles, int k);
/// Top-k by sample count, descending; ties to the lower id.
std::vector<ClientId> select_largest_data(std::span<const ClientProfile> profiles, int k);
/// Greedy max class coverage. A class counts as covered once the chosen
/// clients jointly hold at least `coverage_threshold` samples of it. Ties go
/// to fewer past participations, then higher histogram entropy, then more
/// samples, then the lower id. The participation key rotates the slots that
/// add no coverage, so the same clients are not picked every round.
std::vector<ClientId> select_class_diversity(std::span<const ClientProfile> profiles, int k,
                                             std::int64_t coverage_threshold = 1);

/// Number of classes whose summed count over `chosen` reaches the threshold.
int class_coverage(std::span<const ClientProfile> profiles, std::span<const ClientId> chosen,
                   std::int64_t coverage_threshold = 1);

/// Planning interface. Implementations must be pure: equal inputs give equal
/// plans.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual RoundPlan plan(const TelemetrySnapshot& telemetry, const MemoryStore& memory,
                         const std::optional<Feedback>& feedback,
                         const ControlConfig& cfg) const = 0;
};

/// Rule-based planner. Starts from the configured defaults, carries forward
/// the previous round's hyperparameters and quantization, then applies
/// feedback: plateau -> one more local epoch (capped); latency over budget ->
/// next lower quantization width (32 -> 16 -> 8).
class RulePlanner final : public Planner {
 public:
  RoundPlan plan(const TelemetrySnapshot& telemetry, const MemoryStore& memory,
                 const std::optional<Feedback>& feedback,
                 const ControlConfig& cfg) const override;
};

RoundPlan plan_round(const TelemetrySnapshot& telemetry, const MemoryStore& memory,
                     const std::optional<Feedback>& feedback, const ControlConfig& cfg);

/// Fills in metrics and feedback for a drafted record. The accuracy delta is
/// taken against the previous round (or `initial_accuracy` for the first);
/// plateau holds when the last `patience` deltas, this one included, are all
/// below plateau_epsilon.
std::pair<RoundRecord, Feedback> evaluate_round(RoundRecord draft, const RoundMetrics& metrics,
                                                const MemoryStore& memory,
                                                double initial_accuracy,
                                                const ControlConfig& cfg);

}  // namespace flsim
