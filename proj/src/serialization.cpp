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

#include "flsim/serialization.hpp"

namespace flsim {

void to_json(json& j, const Hyperparams& h) {
  j = json{{"learning_rate", h.learning_rate},
           {"batch_size", h.batch_size},
           {"local_epochs", h.local_epochs}};
}

void from_json(const json& j, Hyperparams& h) {
  j.at("learning_rate").get_to(h.learning_rate);
  j.at("batch_size").get_to(h.batch_size);
  j.at("local_epochs").get_to(h.local_epochs);
}

void to_json(json& j, const LinkReport& r) {
  j = json{{"client_id", r.client_id},
           {"channel", r.channel},
           {"snr_db", r.snr_db},
           {"rate_bps", r.rate_bps},
           {"uplink_latency_s", r.uplink_latency_s},
           {"downlink_latency_s", r.downlink_latency_s},
           {"dropped", r.dropped}};
}

void from_json(const json& j, LinkReport& r) {
  j.at("client_id").get_to(r.client_id);
  j.at("channel").get_to(r.channel);
  j.at("snr_db").get_to(r.snr_db);
  j.at("rate_bps").get_to(r.rate_bps);
  j.at("uplink_latency_s").get_to(r.uplink_latency_s);
  j.at("downlink_latency_s").get_to(r.downlink_latency_s);
  j.at("dropped").get_to(r.dropped);
}

void to_json(json& j, const RoundPlan& p) {
  j = json{{"round_idx", p.round_idx},
           {"policy", std::string(to_string(p.policy))},
           {"selected_clients", p.selected_clients},
           {"hyper", p.hyper},
           {"quant_bits", p.quant_bits},
           {"k", p.k}};
}

void from_json(const json& j, RoundPlan& p) {
  j.at("round_idx").get_to(p.round_idx);
  p.policy = policy_from_string(j.at("policy").get<std::string>());
  j.at("selected_clients").get_to(p.selected_clients);
  j.at("hyper").get_to(p.hyper);
  j.at("quant_bits").get_to(p.quant_bits);
  j.at("k").get_to(p.k);
}

void to_json(json& j, const Feedback& f) {
  j = json{{"accuracy_delta", f.accuracy_delta},
           {"plateau", f.plateau},
           {"latency_over_budget", f.latency_over_budget},
           {"notes", f.notes}};
}

void from_json(const json& j, Feedback& f) {
  j.at("accuracy_delta").get_to(f.accuracy_delta);
  j.at("plateau").get_to(f.plateau);
  j.at("latency_over_budget").get_to(f.latency_over_budget);
  j.at("notes").get_to(f.notes);
}

void to_json(json& j, const RoundMetrics& m) {
  j = json{{"test_accuracy", m.test_accuracy},
           {"test_loss", m.test_loss},
           {"mean_train_loss", m.mean_train_loss},
           {"avg_selected_snr_db", m.avg_selected_snr_db},
           {"round_comm_latency_s", m.round_comm_latency_s},
           {"round_compute_latency_s", m.round_compute_latency_s}};
}

void from_json(const json& j, RoundMetrics& m) {
  j.at("test_accuracy").get_to(m.test_accuracy);
  j.at("test_loss").get_to(m.test_loss);
  j.at("mean_train_loss").get_to(m.mean_train_loss);
  j.at("avg_selected_snr_db").get_to(m.avg_selected_snr_db);
  j.at("round_comm_latency_s").get_to(m.round_comm_latency_s);
  j.at("round_compute_latency_s").get_to(m.round_compute_latency_s);
}

void to_json(json& j, const RoundRecord& r) {
  j = json{{"plan", r.plan},
           {"channel_queues", r.channel_queues},
           {"link_reports", r.link_reports},
           {"survivors", r.survivors},
           {"kept", r.kept},
           {"discarded", r.discarded},
           {"no_update", r.no_update},
           {"uplink_payload_bits", r.uplink_payload_bits},
           {"metrics", r.metrics},
           {"feedback", r.feedback},
           {"env_snr_db", r.env_snr_db},
           {"env_dropout", r.env_dropout}};
}

void from_json(const json& j, RoundRecord& r) {
  j.at("plan").get_to(r.plan);
  j.at("channel_queues").get_to(r.channel_queues);
  j.at("link_reports").get_to(r.link_reports);
  j.at("survivors").get_to(r.survivors);
  j.at("kept").get_to(r.kept);
  j.at("discarded").get_to(r.discarded);
  j.at("no_update").get_to(r.no_update);
  j.at("uplink_payload_bits").get_to(r.uplink_payload_bits);
  j.at("metrics").get_to(r.metrics);
  j.at("feedback").get_to(r.feedback);
  j.at("env_snr_db").get_to(r.env_snr_db);
  j.at("env_dropout").get_to(r.env_dropout);
}

std::string to_line(const RoundRecord& record) { return json(record).dump(); }

}  // namespace flsim
