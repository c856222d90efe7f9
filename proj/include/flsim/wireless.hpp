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
#include <vector>

#include "flsim/common.hpp"

namespace flsim {

struct WirelessConfig {
  double bandwidth_hz_per_channel = 5e6;
  int num_channels = 5;
  double snr_db_min = 10.0;
  double snr_db_max = 25.0;
  double dropout_prob = 0.30;
  std::int64_t header_bits = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One TDMA slot queue per channel; queue order is transmission order.
struct ChannelAssignment {
  std::vector<std::vector<ClientId>> queues;

  int num_channels() const { return static_cast<int>(queues.size()); }
  std::optional<int> channel_of(ClientId id) const;
  std::size_t num_assigned() const;
};

struct LinkReport {
  ClientId client_id = 0;
  int channel = -1;
  double snr_db = 0.0;
  double rate_bps = 0.0;
  double uplink_latency_s = 0.0;
  double downlink_latency_s = 0.0;
  bool dropped = false;
};

/// SNR for one client in one round, uniform on [snr_db_min, snr_db_max] and
/// keyed on (seed, round, client).
double client_snr(const WirelessConfig& cfg, int round_idx, ClientId client);

std::map<ClientId, double> sample_snr(const std::vector<ClientId>& clients,
                                      const WirelessConfig& cfg, int round_idx);

/// Shannon capacity B * log2(1 + 10^(snr_db / 10)).
double achievable_rate(double bandwidth_hz, double snr_db);

/// (payload_bits + header_bits) / rate_bps. Throws DomainError for rate <= 0
/// or negative sizes.
double transfer_latency(std::int64_t payload_bits, double rate_bps,
                        std::int64_t header_bits = 0);

/// LPT list scheduling of per-client uplink latencies onto `num_channels`
/// queues. Clients are taken in descending latency (ties by client id) and
/// each goes to the channel with the smallest accumulated latency (ties by
/// channel index). With no more clients than channels, each client gets its
/// own channel.
ChannelAssignment assign_channels_lpt(const std::vector<ClientId>& selected,
                                      const std::map<ClientId, double>& uplink_latency_s,
                                      int num_channels);

/// LPT assignment using uplink latency estimated from each client's SNR and
/// the planned payload size.
ChannelAssignment assign_channels(const std::vector<ClientId>& selected,
                                  const std::map<ClientId, double>& snr_db,
                                  const WirelessConfig& cfg, std::int64_t payload_bits);

/// Longest per-channel queue sum.
double makespan(const ChannelAssignment& assignment,
                const std::map<ClientId, double>& uplink_latency_s);

/// Downlink phase (max downlink over queued clients) followed by the uplink
/// phase (max over channels of the queue's summed uplink latency, dropped
/// clients excluded).
double round_comm_latency(const ChannelAssignment& assignment,
                          const std::vector<LinkReport>& reports);

bool client_drops(const WirelessConfig& cfg, int round_idx, ClientId client);

/// Survivors in their original order.
std::vector<ClientId> apply_dropout(const std::vector<ClientId>& selected,
                                    const WirelessConfig& cfg, int round_idx);

}  // namespace flsim
