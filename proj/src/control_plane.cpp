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

#include "flsim/control_plane.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "flsim/serialization.hpp"

namespace flsim {

namespace {

std::vector<ClientId> top_k_by(std::span<const ClientProfile> profiles, int k,
                               auto key) {
  std::vector<const ClientProfile*> order;
  for (const auto& p : profiles) order.push_back(&p);
  std::sort(order.begin(), order.end(), [&](const ClientProfile* a, const ClientProfile* b) {
    const auto ka = key(*a);
    const auto kb = key(*b);
    if (ka != kb) return ka > kb;
    return a->client_id < b->client_id;
  });
  const auto n = std::min(order.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::vector<ClientId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(order[i]->client_id);
  return out;
}

int next_lower_bits(int bits) { return bits > 16 ? 16 : 8; }

}  // namespace

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::random: return "random";
    case Policy::latency: return "latency";
    case Policy::largest_data: return "largest_data";
    case Policy::class_diversity: return "class_diversity";
  }
  return "random";
}

Policy policy_from_string(std::string_view name) {
  for (Policy p : kAllPolicies) {
    if (to_string(p) == name) return p;
  }
  throw DomainError("unknown policy '" + std::string(name) + "'");
}

bool ClientProfile::operator==(const ClientProfile& other) const {
  return client_id == other.client_id && num_samples == other.num_samples &&
         class_histogram.size() == other.class_histogram.size() &&
         class_histogram == other.class_histogram && compute_speed == other.compute_speed &&
         current_snr_db == other.current_snr_db &&
         cumulative_participation == other.cumulative_participation &&
         cumulative_reward == other.cumulative_reward;
}

// ---------------------------------------------------------------------------
// Memory

void MemoryStore::append(RoundRecord record) {
  if (!records_.empty() && record.round_idx() <= records_.back().round_idx()) {
    throw ConsistencyError("memory already holds round " + std::to_string(record.round_idx()) +
                           " or a later one");
  }
  digests_.push_back(rng::label_hash(to_line(record)));
  records_.push_back(std::move(record));
}

std::span<const RoundRecord> MemoryStore::last_n(std::size_t n) const {
  const std::size_t take = std::min(n, records_.size());
  return std::span<const RoundRecord>(records_).subspan(records_.size() - take, take);
}

std::optional<int> MemoryStore::best_round() const {
  if (records_.empty()) return std::nullopt;
  const RoundRecord* best = &records_.front();
  for (const auto& r : records_) {
    if (r.metrics.test_accuracy > best->metrics.test_accuracy) best = &r;
  }
  return best->round_idx();
}

std::map<Policy, PolicyStats> MemoryStore::policy_stats() const {
  std::map<Policy, PolicyStats> out;
  for (const auto& r : records_) {
    auto& s = out[r.plan.policy];
    ++s.rounds;
    s.mean_test_accuracy += r.metrics.test_accuracy;
    s.mean_comm_latency_s += r.metrics.round_comm_latency_s;
    s.mean_selected_snr_db += r.metrics.avg_selected_snr_db;
  }
  for (auto& [policy, s] : out) {
    const double n = static_cast<double>(s.rounds);
    s.mean_test_accuracy /= n;
    s.mean_comm_latency_s /= n;
    s.mean_selected_snr_db /= n;
  }
  return out;
}

bool MemoryStore::verify_integrity() const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (rng::label_hash(to_line(records_[i])) != digests_[i]) return false;
  }
  return true;
}

std::string MemoryStore::to_ndjson() const {
  std::string out;
  for (const auto& r : records_) {
    out += to_line(r);
    out += '\n';
  }
  return out;
}

MemoryStore MemoryStore::from_ndjson(std::string_view text) {
  MemoryStore store;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      store.append(json::parse(line).get<RoundRecord>());
    } catch (const json::exception& e) {
      throw FormatError("memory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return store;
}

bool MemoryStore::operator==(const MemoryStore& other) const {
  return to_ndjson() == other.to_ndjson();
}

// ---------------------------------------------------------------------------
// Retrieval

TelemetrySnapshot collect_telemetry(const World& world, int round_idx, const MemoryStore& memory,
                                    double global_accuracy, double unit_reward) {
  std::vector<std::int64_t> participation(world.shards.size(), 0);
  for (const auto& r : memory.records()) {
    for (ClientId id : r.survivors) ++participation[static_cast<std::size_t>(id)];
  }

  TelemetrySnapshot snap;
  snap.round_idx = round_idx;
  snap.num_channels = world.wireless.num_channels;
  snap.bandwidth_hz = world.wireless.bandwidth_hz_per_channel;
  snap.global_accuracy_so_far = global_accuracy;
  snap.profiles.reserve(world.shards.size());
  for (std::size_t i = 0; i < world.shards.size(); ++i) {
    const auto& shard = world.shards[i];
    ClientProfile p;
    p.client_id = shard.client_id;
    p.num_samples = static_cast<std::int64_t>(shard.size());
    p.class_histogram = shard.class_histogram;
    p.compute_speed = world.compute_speed[i];
    p.current_snr_db = client_snr(world.wireless, round_idx, shard.client_id);
    p.cumulative_participation = participation[i];
    p.cumulative_reward = static_cast<double>(participation[i]) * unit_reward;
    snap.profiles.push_back(std::move(p));
  }
  return snap;
}

// ---------------------------------------------------------------------------
// Selection

std::vector<ClientId> select_random(std::span<const ClientProfile> profiles, int k,
                                    rng::Stream& stream) {
  std::vector<ClientId> ids;
  for (const auto& p : profiles) ids.push_back(p.client_id);
  const auto n = std::min(ids.size(), static_cast<std::size_t>(std::max(k, 0)));
  // Partial Fisher-Yates: the first n slots are a uniform ordered sample.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(stream.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  return ids;
}

std::vector<ClientId> select_latency(std::span<const ClientProfile> profiles, int k) {
  return top_k_by(profiles, k, [](const ClientProfile& p) { return p.current_snr_db; });
}

std::vector<ClientId> select_largest_data(std::span<const ClientProfile> profiles, int k) {
  return top_k_by(profiles, k, [](const ClientProfile& p) { return p.num_samples; });
}

std::vector<ClientId> select_class_diversity(std::span<const ClientProfile> profiles, int k,
                                             std::int64_t coverage_threshold) {
  if (profiles.empty()) return {};
  const Eigen::Index num_classes = profiles.front().class_histogram.size();
  CountVector cumulative = CountVector::Zero(num_classes);
  std::vector<bool> taken(profiles.size(), false);
  std::vector<double> entropy(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    entropy[i] = label_entropy(profiles[i].class_histogram);
  }

  auto newly_covered = [&](const ClientProfile& p) {
    int gain = 0;
    for (Eigen::Index c = 0; c < num_classes; ++c) {
      if (cumulative(c) < coverage_threshold &&
          cumulative(c) + p.class_histogram(c) >= coverage_threshold) {
        ++gain;
      }
    }
    return gain;
  };

  const auto n = std::min(profiles.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::vector<ClientId> chosen;
  while (chosen.size() < n) {
    std::optional<std::size_t> best;
    int best_gain = -1;
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (taken[i]) continue;
      const int gain = newly_covered(profiles[i]);
      bool better = false;
      if (!best) {
        better = true;
      } else if (gain != best_gain) {
        better = gain > best_gain;
      } else if (profiles[i].cumulative_participation !=
                 profiles[*best].cumulative_participation) {
        better = profiles[i].cumulative_participation < profiles[*best].cumulative_participation;
      } else if (entropy[i] != entropy[*best]) {
        better = entropy[i] > entropy[*best];
      } else if (profiles[i].num_samples != profiles[*best].num_samples) {
        better = profiles[i].num_samples > profiles[*best].num_samples;
      } else {
        better = profiles[i].client_id < profiles[*best].client_id;
      }
      if (better) {
        best = i;
        best_gain = gain;
      }
    }
    taken[*best] = true;
    cumulative += profiles[*best].class_histogram;
    chosen.push_back(profiles[*best].client_id);
  }
  return chosen;
}

int class_coverage(std::span<const ClientProfile> profiles, std::span<const ClientId> chosen,
                   std::int64_t coverage_threshold) {
  if (profiles.empty()) return 0;
  CountVector sum = CountVector::Zero(profiles.front().class_histogram.size());
  for (ClientId id : chosen) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [id](const ClientProfile& p) { return p.client_id == id; });
    if (it == profiles.end()) throw ConsistencyError("unknown client " + std::to_string(id));
    sum += it->class_histogram;
  }
  return static_cast<int>((sum.array() >= coverage_threshold).count());
}

// ---------------------------------------------------------------------------
// Planning

RoundPlan RulePlanner::plan(const TelemetrySnapshot& telemetry, const MemoryStore& memory,
                            const std::optional<Feedback>& feedback,
                            const ControlConfig& cfg) const {
  RoundPlan plan;
  plan.round_idx = telemetry.round_idx;
  plan.policy = cfg.policy;
  plan.k = cfg.k.value_or(telemetry.num_channels);
  plan.hyper = cfg.hyper_defaults;
  plan.quant_bits = cfg.quant_bits;
  if (!memory.empty()) {
    plan.hyper = memory.back().plan.hyper;
    plan.quant_bits = memory.back().plan.quant_bits;
  }
  if (feedback) {
    if (feedback->plateau && plan.hyper.local_epochs < cfg.max_local_epochs) {
      ++plan.hyper.local_epochs;
    }
    if (feedback->latency_over_budget) plan.quant_bits = next_lower_bits(plan.quant_bits);
  }

  const std::span<const ClientProfile> profiles(telemetry.profiles);
  switch (plan.policy) {
    case Policy::random: {
      rng::Stream stream(cfg.seed, rng::labels::kSelect,
                         static_cast<std::uint64_t>(telemetry.round_idx));
      plan.selected_clients = select_random(profiles, plan.k, stream);
      break;
    }
    case Policy::latency:
      plan.selected_clients = select_latency(profiles, plan.k);
      break;
    case Policy::largest_data:
      plan.selected_clients = select_largest_data(profiles, plan.k);
      break;
    case Policy::class_diversity:
      plan.selected_clients = select_class_diversity(profiles, plan.k, cfg.coverage_threshold);
      break;
  }
  return plan;
}

RoundPlan plan_round(const TelemetrySnapshot& telemetry, const MemoryStore& memory,
                     const std::optional<Feedback>& feedback, const ControlConfig& cfg) {
  return RulePlanner{}.plan(telemetry, memory, feedback, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

std::pair<RoundRecord, Feedback> evaluate_round(RoundRecord draft, const RoundMetrics& metrics,
                                                const MemoryStore& memory,
                                                double initial_accuracy,
                                                const ControlConfig& cfg) {
  const double previous =
      memory.empty() ? initial_accuracy : memory.back().metrics.test_accuracy;

  Feedback fb;
  fb.accuracy_delta = metrics.test_accuracy - previous;

  const auto patience = static_cast<std::size_t>(std::max(cfg.patience, 1));
  if (fb.accuracy_delta < cfg.plateau_epsilon) {
    std::size_t run = 1;
    for (auto it = memory.records().rbegin(); it != memory.records().rend() && run < patience;
         ++it) {
      if (!(it->feedback.accuracy_delta < cfg.plateau_epsilon)) break;
      ++run;
    }
    fb.plateau = run >= patience;
  }
  fb.latency_over_budget = metrics.round_comm_latency_s > cfg.latency_budget_s;

  if (fb.plateau) fb.notes.emplace_back("plateau");
  if (fb.latency_over_budget) fb.notes.emplace_back("latency_over_budget");
  if (draft.no_update) fb.notes.emplace_back("no_update");
  if (!draft.discarded.empty()) {
    fb.notes.push_back("discarded:" + std::to_string(draft.discarded.size()));
  }

  draft.metrics = metrics;
  draft.feedback = fb;
  return {std::move(draft), std::move(fb)};
}

}  // namespace flsim
