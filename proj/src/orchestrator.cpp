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

#include "flsim/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include "flsim/cli_io.hpp"
#include "flsim/rng.hpp"

namespace flsim {

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string(field) + ": " + what, field);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void SimConfig::validate() const {
  require(partition.num_clients >= 1, "num_clients", "must be >= 1");
  require(partition.alpha > 0.0 && std::isfinite(partition.alpha), "alpha", "must be > 0");
  require(partition.min_samples_per_client >= 0, "min_samples_per_client", "must be >= 0");
  require(wireless.bandwidth_hz_per_channel > 0.0, "bandwidth_hz", "must be > 0");
  require(wireless.num_channels >= 1, "num_channels", "must be >= 1");
  require(std::isfinite(wireless.snr_db_min) && std::isfinite(wireless.snr_db_max),
          "snr_db_min", "must be finite");
  require(wireless.snr_db_min <= wireless.snr_db_max, "snr_db_max", "must be >= snr_db_min");
  require(wireless.dropout_prob >= 0.0 && wireless.dropout_prob <= 1.0, "dropout_prob",
          "must lie in [0, 1]");
  require(wireless.header_bits >= 0, "header_bits", "must be >= 0");
  require(model_kind == ModelKind::logistic || hidden_units >= 1, "hidden_units",
          "must be >= 1");
  require(hyper.learning_rate >= 0.0 && std::isfinite(hyper.learning_rate), "learning_rate",
          "must be finite and >= 0");
  require(hyper.batch_size >= 1, "batch_size", "must be >= 1");
  require(max_local_epochs >= 1, "max_local_epochs", "must be >= 1");
  require(hyper.local_epochs >= 1 && hyper.local_epochs <= max_local_epochs, "local_epochs",
          "must lie in [1, max_local_epochs]");
  require(rounds >= 0, "rounds", "must be >= 0");
  require(!k || *k >= 1, "k", "must be >= 1 (or 0 for one client per channel)");
  require(quant_bits == 32 || quant_bits == 16 || quant_bits == 8, "quant_bits",
          "must be 32, 16 or 8");
  require(filter_multiplier > 0.0, "filter_multiplier", "must be > 0");
  require(std::isfinite(plateau_epsilon), "plateau_epsilon", "must be finite");
  require(patience >= 1, "patience", "must be >= 1");
  require(latency_budget_s > 0.0, "latency_budget_s", "must be > 0");
  require(compute_speed_min > 0.0, "compute_speed_min", "must be > 0");
  require(compute_speed_max >= compute_speed_min, "compute_speed_max",
          "must be >= compute_speed_min");
  require(coverage_threshold >= 1, "coverage_threshold", "must be >= 1");
  require(unit_reward >= 0.0, "unit_reward", "must be >= 0");
  require(data.synthetic.num_classes >= 1, "synthetic_classes", "must be >= 1");
  require(data.synthetic.samples_per_class >= 1, "synthetic_samples_per_class", "must be >= 1");
  require(data.synthetic.feature_dim >= 1, "synthetic_feature_dim", "must be >= 1");
  require(data.synthetic.separation >= 0.0, "synthetic_separation", "must be >= 0");
  require(data.synthetic_test_per_class >= 1, "synthetic_test_per_class", "must be >= 1");
}

ControlConfig SimConfig::control() const {
  ControlConfig c;
  c.policy = policy;
  c.k = k;
  c.hyper_defaults = hyper;
  c.max_local_epochs = max_local_epochs;
  c.quant_bits = quant_bits;
  c.filter_multiplier = filter_multiplier;
  c.plateau_epsilon = plateau_epsilon;
  c.patience = patience;
  c.latency_budget_s = latency_budget_s;
  c.coverage_threshold = coverage_threshold;
  c.unit_reward = unit_reward;
  c.seed = master_seed;
  return c;
}

ReportSummary summarize(double initial_accuracy, const std::vector<RoundRecord>& rounds) {
  ReportSummary s;
  s.final_accuracy = rounds.empty() ? initial_accuracy : rounds.back().metrics.test_accuracy;
  std::vector<double> snr;
  std::vector<double> comm;
  std::vector<double> compute;
  for (const auto& r : rounds) {
    snr.push_back(r.metrics.avg_selected_snr_db);
    comm.push_back(r.metrics.round_comm_latency_s);
    compute.push_back(r.metrics.round_compute_latency_s);
    s.total_payload_bits += r.uplink_payload_bits;
  }
  s.mean_selected_snr_db = mean_of(snr);
  s.mean_round_comm_latency_s = mean_of(comm);
  s.mean_round_compute_latency_s = mean_of(compute);
  return s;
}

World make_world(const SimConfig& cfg, const LabeledDataset& train) {
  World world;
  PartitionConfig pc = cfg.partition;
  pc.seed = cfg.master_seed;
  world.shards = dirichlet_partition(train, pc);
  world.wireless = cfg.wireless;
  world.wireless.seed = cfg.master_seed;
  for (int i = 0; i < pc.num_clients; ++i) {
    rng::Stream s(cfg.master_seed, rng::labels::kCompute, static_cast<std::uint64_t>(i));
    world.compute_speed.push_back(s.uniform(cfg.compute_speed_min, cfg.compute_speed_max));
  }
  return world;
}

SimulationReport run_simulation(const SimConfig& cfg, const LabeledDataset& train,
                                const LabeledDataset& test) {
  return run_simulation(cfg, train, test, RulePlanner{});
}

SimulationReport run_simulation(const SimConfig& cfg, const LabeledDataset& train,
                                const LabeledDataset& test, const Planner& planner) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  train.validate();
  test.validate();
  if (train.feature_dim() != test.feature_dim()) {
    throw ConsistencyError("train and test feature dimensions differ");
  }

  const World world = make_world(cfg, train);
  const ControlConfig control = cfg.control();
  const ModelDims dims{train.feature_dim(), std::max(train.num_classes, test.num_classes),
                       cfg.model_kind == ModelKind::mlp1 ? cfg.hidden_units : 0};
  ModelParams global = init_model(cfg.model_kind, dims, cfg.master_seed);
  const auto n_params = static_cast<std::size_t>(global.values.size());
  const std::int64_t downlink_bits = payload_bits_for(n_params, 32);

  SimulationReport report;
  report.config = cfg;
  const EvalResult init_eval = evaluate(global, test);
  report.initial_accuracy = init_eval.accuracy;
  report.initial_loss = init_eval.mean_loss;

  MemoryStore memory;
  std::optional<Feedback> feedback;
  double current_accuracy = init_eval.accuracy;

  auto finish = [&](bool aborted) {
    report.rounds = memory.records();
    report.summary = summarize(report.initial_accuracy, report.rounds);
    report.aborted = aborted;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  for (int round = 0; round < cfg.rounds; ++round) {
    const TelemetrySnapshot telemetry =
        collect_telemetry(world, round, memory, current_accuracy, cfg.unit_reward);
    const RoundPlan plan = planner.plan(telemetry, memory, feedback, control);

    std::map<ClientId, double> snr;
    RoundRecord draft;
    for (const auto& p : telemetry.profiles) {
      snr[p.client_id] = p.current_snr_db;
      draft.env_snr_db.push_back(p.current_snr_db);
      draft.env_dropout.push_back(client_drops(world.wireless, round, p.client_id));
    }

    const std::int64_t planned_bits = payload_bits_for(n_params, plan.quant_bits);
    const ChannelAssignment assignment =
        assign_channels(plan.selected_clients, snr, world.wireless, planned_bits);

    // Local training happens for every selected client; dropout strikes
    // afterwards, before the uplink.
    std::vector<ModelUpdate> survivors;
    double compute_latency = 0.0;
    double train_loss_sum = 0.0;
    double snr_sum = 0.0;
    for (ClientId id : plan.selected_clients) {
      const auto& shard = world.shards[static_cast<std::size_t>(id)];
      const std::uint64_t train_seed =
          rng::Stream(cfg.master_seed, rng::labels::kShuffle, static_cast<std::uint64_t>(round),
                      static_cast<std::uint64_t>(id))
              .key();
      ModelUpdate update;
      try {
        update = local_train(global, shard, train, plan.hyper, train_seed, round);
      } catch (const DivergenceError& e) {
        finish(true);
        throw SimulationAborted(e, report);
      }
      compute_latency = std::max(compute_latency,
                                 static_cast<double>(plan.hyper.local_epochs) *
                                     static_cast<double>(shard.size()) /
                                     world.compute_speed[static_cast<std::size_t>(id)]);
      train_loss_sum += update.train_loss;
      snr_sum += snr.at(id);

      update = quantize_roundtrip(update, plan.quant_bits);
      LinkReport link;
      link.client_id = id;
      link.channel = assignment.channel_of(id).value_or(-1);
      link.snr_db = snr.at(id);
      link.rate_bps = achievable_rate(world.wireless.bandwidth_hz_per_channel, link.snr_db);
      link.downlink_latency_s =
          transfer_latency(downlink_bits, link.rate_bps, world.wireless.header_bits);
      link.uplink_latency_s =
          transfer_latency(update.payload_bits, link.rate_bps, world.wireless.header_bits);
      link.dropped = client_drops(world.wireless, round, id);
      draft.link_reports.push_back(link);
      if (!link.dropped) {
        draft.survivors.push_back(id);
        draft.uplink_payload_bits += update.payload_bits;
        survivors.push_back(std::move(update));
      }
    }

    double train_loss_mean = 0.0;
    double snr_mean = 0.0;
    if (!plan.selected_clients.empty()) {
      const auto n = static_cast<double>(plan.selected_clients.size());
      train_loss_mean = train_loss_sum / n;
      snr_mean = snr_sum / n;
    }

    if (survivors.empty()) {
      draft.no_update = true;
    } else {
      FilterResult filtered = filter_updates(survivors, global, cfg.filter_multiplier);
      for (const auto& u : filtered.kept) draft.kept.push_back(u.client_id);
      for (const auto& u : filtered.discarded) draft.discarded.push_back(u.client_id);
      global = fedavg(filtered.kept);
    }

    RoundMetrics metrics;
    const EvalResult eval = evaluate(global, test);
    metrics.test_accuracy = eval.accuracy;
    metrics.test_loss = eval.mean_loss;
    metrics.mean_train_loss = train_loss_mean;
    metrics.avg_selected_snr_db = snr_mean;
    metrics.round_comm_latency_s = round_comm_latency(assignment, draft.link_reports);
    metrics.round_compute_latency_s = compute_latency;

    draft.plan = plan;
    draft.channel_queues = assignment.queues;
    auto [record, fb] =
        evaluate_round(std::move(draft), metrics, memory, report.initial_accuracy, control);
    memory.append(std::move(record));
    feedback = std::move(fb);
    current_accuracy = metrics.test_accuracy;
  }

  if (!memory.verify_integrity()) throw ConsistencyError("memory record changed after append");
  finish(false);
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

ComparisonReport run_comparison(const SimConfig& cfg, const std::vector<Policy>& policies,
                                const std::vector<std::uint64_t>& seeds,
                                const std::vector<int>& channels, const LabeledDataset& train,
                                const LabeledDataset& test, unsigned max_threads) {
  if (policies.empty()) throw DomainError("comparison needs at least one policy");
  if (seeds.empty()) throw DomainError("comparison needs at least one seed");
  const std::vector<int> ks =
      channels.empty() ? std::vector<int>{cfg.wireless.num_channels} : channels;

  std::vector<SimConfig> jobs;
  for (Policy p : policies) {
    for (std::uint64_t s : seeds) {
      for (int k : ks) {
        SimConfig c = cfg;
        c.policy = p;
        c.master_seed = s;
        c.wireless.num_channels = k;
        jobs.push_back(c);
      }
    }
  }

  unsigned threads = max_threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : max_threads;
  std::vector<SimulationReport> runs(jobs.size());
  for (std::size_t start = 0; start < jobs.size(); start += threads) {
    const std::size_t stop = std::min(jobs.size(), start + threads);
    std::vector<std::future<SimulationReport>> pending;
    for (std::size_t i = start; i < stop; ++i) {
      pending.push_back(std::async(threads == 1 ? std::launch::deferred : std::launch::async,
                                   [&, i] { return run_simulation(jobs[i], train, test); }));
    }
    for (std::size_t i = start; i < stop; ++i) runs[i] = pending[i - start].get();
  }

  ComparisonReport out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    ComparisonRow row;
    row.policy = jobs[i].policy;
    row.seed = jobs[i].master_seed;
    row.num_channels = jobs[i].wireless.num_channels;
    row.avg_selected_snr_db = runs[i].summary.mean_selected_snr_db;
    row.avg_comm_latency_s = runs[i].summary.mean_round_comm_latency_s;
    row.final_test_accuracy = runs[i].summary.final_accuracy;
    out.rows.push_back(row);
  }
  for (Policy p : policies) {
    for (int k : ks) {
      PolicyAggregate agg;
      agg.policy = p;
      agg.num_channels = k;
      std::vector<double> snr;
      std::vector<double> lat;
      std::vector<double> acc;
      for (const auto& row : out.rows) {
        if (row.policy != p || row.num_channels != k) continue;
        snr.push_back(row.avg_selected_snr_db);
        lat.push_back(row.avg_comm_latency_s);
        acc.push_back(row.final_test_accuracy);
      }
      agg.runs = acc.size();
      agg.mean_snr_db = mean_of(snr);
      agg.mean_comm_latency_s = mean_of(lat);
      agg.mean_final_accuracy = mean_of(acc);
      agg.median_snr_db = median(snr);
      agg.median_comm_latency_s = median(lat);
      agg.median_final_accuracy = median(acc);
      out.aggregates.push_back(agg);
    }
  }
  out.runs = std::move(runs);
  return out;
}

SimulationReport replay(const SimulationReport& recorded, const LabeledDataset& train,
                        const LabeledDataset& test) {
  SimulationReport fresh = run_simulation(recorded.config, train, test);
  json a = report_to_json(recorded);
  json b = json::parse(report_to_json(fresh).dump());
  a = json::parse(a.dump());
  a.erase("wall_time_s");
  b.erase("wall_time_s");
  const json patch = json::diff(a, b);
  if (!patch.empty()) {
    const std::string field = patch.front().at("path").get<std::string>();
    throw ReproducibilityError("replay diverges at " + field, field);
  }
  return fresh;
}

}  // namespace flsim
