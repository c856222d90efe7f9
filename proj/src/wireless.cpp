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

#include "flsim/wireless.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flsim/rng.hpp"

namespace flsim {

void WirelessConfig::validate() const {
  if (!(bandwidth_hz_per_channel > 0.0)) throw DomainError("bandwidth_hz must be > 0");
  if (num_channels < 1) throw DomainError("num_channels must be >= 1");
  if (!(snr_db_min <= snr_db_max)) throw DomainError("snr_db_min must be <= snr_db_max");
  if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0)) {
    throw DomainError("dropout_prob must lie in [0, 1]");
  }
  if (header_bits < 0) throw DomainError("header_bits must be >= 0");
}

std::optional<int> ChannelAssignment::channel_of(ClientId id) const {
  for (std::size_t ch = 0; ch < queues.size(); ++ch) {
    if (std::find(queues[ch].begin(), queues[ch].end(), id) != queues[ch].end()) {
      return static_cast<int>(ch);
    }
  }
  return std::nullopt;
}

std::size_t ChannelAssignment::num_assigned() const {
  std::size_t n = 0;
  for (const auto& q : queues) n += q.size();
  return n;
}

double client_snr(const WirelessConfig& cfg, int round_idx, ClientId client) {
  rng::Stream s(cfg.seed, rng::labels::kSnr, static_cast<std::uint64_t>(round_idx),
                static_cast<std::uint64_t>(client));
  return s.uniform(cfg.snr_db_min, cfg.snr_db_max);
}

std::map<ClientId, double> sample_snr(const std::vector<ClientId>& clients,
                                      const WirelessConfig& cfg, int round_idx) {
  std::map<ClientId, double> out;
  for (ClientId id : clients) out[id] = client_snr(cfg, round_idx, id);
  return out;
}

double achievable_rate(double bandwidth_hz, double snr_db) {
  if (!(bandwidth_hz > 0.0)) throw DomainError("bandwidth must be positive");
  return bandwidth_hz * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

double transfer_latency(std::int64_t payload_bits, double rate_bps, std::int64_t header_bits) {
  if (!(rate_bps > 0.0)) throw DomainError("transfer rate must be positive");
  if (payload_bits < 0 || header_bits < 0) throw DomainError("bit counts must be >= 0");
  return static_cast<double>(payload_bits + header_bits) / rate_bps;
}

ChannelAssignment assign_channels_lpt(const std::vector<ClientId>& selected,
                                      const std::map<ClientId, double>& uplink_latency_s,
                                      int num_channels) {
  if (num_channels < 1) throw DomainError("num_channels must be >= 1");
  auto latency = [&](ClientId id) {
    auto it = uplink_latency_s.find(id);
    if (it == uplink_latency_s.end()) {
      throw ConsistencyError("no latency estimate for client " + std::to_string(id));
    }
    return it->second;
  };

  std::vector<std::pair<ClientId, double>> order;
  for (ClientId id : selected) order.emplace_back(id, latency(id));
  std::stable_sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });

  ChannelAssignment out;
  out.queues.resize(static_cast<std::size_t>(num_channels));
  if (order.size() <= out.queues.size()) {
    for (std::size_t i = 0; i < order.size(); ++i) out.queues[i].push_back(order[i].first);
    return out;
  }

  std::vector<double> load(out.queues.size(), 0.0);
  for (const auto& [id, lat] : order) {
    const auto ch = static_cast<std::size_t>(
        std::min_element(load.begin(), load.end()) - load.begin());
    out.queues[ch].push_back(id);
    load[ch] += lat;
  }
  return out;
}

ChannelAssignment assign_channels(const std::vector<ClientId>& selected,
                                  const std::map<ClientId, double>& snr_db,
                                  const WirelessConfig& cfg, std::int64_t payload_bits) {
  std::map<ClientId, double> est;
  for (ClientId id : selected) {
    auto it = snr_db.find(id);
    if (it == snr_db.end()) {
      throw ConsistencyError("no SNR for client " + std::to_string(id));
    }
    est[id] = transfer_latency(payload_bits,
                               achievable_rate(cfg.bandwidth_hz_per_channel, it->second),
                               cfg.header_bits);
  }
  return assign_channels_lpt(selected, est, cfg.num_channels);
}

double makespan(const ChannelAssignment& assignment,
                const std::map<ClientId, double>& uplink_latency_s) {
  double worst = 0.0;
  for (const auto& q : assignment.queues) {
    double sum = 0.0;
    for (ClientId id : q) sum += uplink_latency_s.at(id);
    worst = std::max(worst, sum);
  }
  return worst;
}

double round_comm_latency(const ChannelAssignment& assignment,
                          const std::vector<LinkReport>& reports) {
  std::map<ClientId, const LinkReport*> by_id;
  for (const auto& r : reports) by_id[r.client_id] = &r;

  double downlink = 0.0;
  double uplink = 0.0;
  for (const auto& q : assignment.queues) {
    double channel_sum = 0.0;
    for (ClientId id : q) {
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw ConsistencyError("no link report for queued client " + std::to_string(id));
      }
      downlink = std::max(downlink, it->second->downlink_latency_s);
      if (!it->second->dropped) channel_sum += it->second->uplink_latency_s;
    }
    uplink = std::max(uplink, channel_sum);
  }
  return downlink + uplink;
}

bool client_drops(const WirelessConfig& cfg, int round_idx, ClientId client) {
  rng::Stream s(cfg.seed, rng::labels::kDropout, static_cast<std::uint64_t>(round_idx),
                static_cast<std::uint64_t>(client));
  return s.bernoulli(cfg.dropout_prob);
}

std::vector<ClientId> apply_dropout(const std::vector<ClientId>& selected,
                                    const WirelessConfig& cfg, int round_idx) {
  std::vector<ClientId> survivors;
  for (ClientId id : selected) {
    if (!client_drops(cfg, round_idx, id)) survivors.push_back(id);
  }
  return survivors;
}

}  // namespace flsim
