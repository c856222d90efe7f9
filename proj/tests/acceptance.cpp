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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "flsim/cli_io.hpp"
#include "flsim/rng.hpp"
#include "oracles.hpp"

using namespace flsim;

namespace {

int failures = 0;
std::map<int, std::string> results;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
  results[id] = std::string(ok ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + title +
                ": " + detail;
  if (!ok) ++failures;
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string canonical(const SimulationReport& r) {
  json j = report_to_json(r);
  j.erase("wall_time_s");
  return j.dump(2);
}

const PolicyAggregate& aggregate_of(const ComparisonReport& c, Policy p) {
  return *std::find_if(c.aggregates.begin(), c.aggregates.end(),
                       [p](const PolicyAggregate& a) { return a.policy == p; });
}

std::vector<std::vector<double>> rows_of(const LabeledDataset& d) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    const auto r = d.features.row(i);
    out.emplace_back(r.data(), r.data() + r.size());
  }
  return out;
}

// Criteria 1, 2, 3 and 10 share the four-policy comparison.
void case_study(const SimConfig& cfg, const LabeledDataset& train, const LabeledDataset& test,
                const std::vector<std::uint64_t>& seeds) {
  const auto started = std::chrono::steady_clock::now();
  const ComparisonReport c = run_comparison(cfg, std::vector<Policy>(std::begin(kAllPolicies), std::end(kAllPolicies)),
                                            seeds, {}, train, test, 0);
  const double elapsed = seconds_since(started);

  std::string acc_detail;
  std::string snr_detail;
  std::string lat_detail;
  for (Policy p : kAllPolicies) {
    const auto& a = aggregate_of(c, p);
    acc_detail += std::string(to_string(p)) + "=" + fmt(a.median_final_accuracy) + " ";
    snr_detail += std::string(to_string(p)) + "=" + fmt(a.median_snr_db) + " ";
    lat_detail += std::string(to_string(p)) + "=" + fmt(a.median_comm_latency_s) + " ";
  }

  const auto& div = aggregate_of(c, Policy::class_diversity);
  bool diversity_best = true;
  bool latency_best_snr = true;
  bool latency_best_delay = true;
  const auto& lat = aggregate_of(c, Policy::latency);
  for (Policy p : kAllPolicies) {
    const auto& a = aggregate_of(c, p);
    if (p != Policy::class_diversity && !(div.median_final_accuracy > a.median_final_accuracy)) {
      diversity_best = false;
    }
    if (p != Policy::latency) {
      if (!(lat.median_snr_db > a.median_snr_db)) latency_best_snr = false;
      if (!(lat.median_comm_latency_s < a.median_comm_latency_s)) latency_best_delay = false;
    }
  }
  const bool fast = elapsed < 300.0;
  report(1, diversity_best && fast, "class_diversity has the highest median final accuracy",
         "median acc " + acc_detail + "(" + std::to_string(seeds.size()) + " seeds, " +
             fmt(elapsed, 3) + " s for 20 runs)");
  report(2, latency_best_snr && latency_best_delay,
         "latency policy has the highest median SNR and lowest median comm latency",
         "median snr_db " + snr_detail + "| median latency_s " + lat_detail);

  // Criterion 3: net improvement per policy, checked against the minimal
  // FedAvg oracle run on the same data and schedule size.
  std::string improve_detail;
  bool improve_ok = true;
  for (Policy p : kAllPolicies) {
    int improved = 0;
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
      if (c.rows[i].policy != p) continue;
      improved += c.runs[i].summary.final_accuracy > c.runs[i].initial_accuracy ? 1 : 0;
    }
    improve_detail += std::string(to_string(p)) + "=" + std::to_string(improved) + "/5 ";
    improve_ok = improve_ok && improved >= 4;
  }
  const auto x_train = rows_of(train);
  const auto x_test = rows_of(test);
  int oracle_improved = 0;
  for (std::uint64_t s : seeds) {
    const auto r = oracle::minimal_fedavg(
        x_train, train.labels, x_test, test.labels, train.num_classes, cfg.partition.num_clients,
        cfg.partition.alpha, cfg.wireless.num_channels, cfg.wireless.dropout_prob, cfg.rounds,
        cfg.hyper.learning_rate, cfg.hyper.batch_size, cfg.hyper.local_epochs, s);
    oracle_improved += r.final_accuracy > r.initial_accuracy ? 1 : 0;
  }
  report(3, improve_ok && oracle_improved >= 4,
         "final accuracy beats initial accuracy in >= 4 of 5 seeds for every policy",
         improve_detail + "| independent FedAvg oracle " + std::to_string(oracle_improved) + "/5");

  // Criterion 10: environment draws agree across policies for each seed.
  bool same_env = true;
  std::size_t compared = 0;
  std::map<std::uint64_t, const SimulationReport*> reference;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const auto [it, fresh] = reference.emplace(c.rows[i].seed, &c.runs[i]);
    if (fresh) continue;
    const auto& a = it->second->rounds;
    const auto& b = c.runs[i].rounds;
    if (a.size() != b.size()) same_env = false;
    for (std::size_t r = 0; r < std::min(a.size(), b.size()); ++r) {
      same_env = same_env && a[r].env_snr_db == b[r].env_snr_db &&
                 a[r].env_dropout == b[r].env_dropout;
      compared += b[r].env_snr_db.size();
    }
  }
  report(10, same_env && compared > 0,
         "per-(round, client) SNR and dropout draws are identical across policies",
         std::to_string(compared) + " (round, client) draws compared against the random-policy log");
}

void gradient_check() {
  const auto started = std::chrono::steady_clock::now();
  rng::Stream s(404, "acceptance-grad");
  double worst = 0.0;
  int instances = 0;
  for (ModelKind kind : {ModelKind::logistic, ModelKind::mlp1}) {
    const int d = 12;
    const int c = 4;
    const int h = kind == ModelKind::mlp1 ? 6 : 0;
    const ModelDims dims{d, c, h};
    const auto data = synth_dataset(SyntheticSpec{c, 10, d, 1.0}, 77);
    for (int t = 0; t < 10; ++t, ++instances) {
      ModelParams p{kind, dims, VectorXd(static_cast<Eigen::Index>(num_params(kind, dims)))};
      for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values(i) = 0.3 * s.normal();
      std::vector<std::size_t> batch;
      for (int b = 0; b < 8; ++b) batch.push_back(static_cast<std::size_t>(s.below(data.size())));
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      for (auto i : batch) {
        const auto r = data.features.row(static_cast<Eigen::Index>(i));
        x.emplace_back(r.data(), r.data() + r.size());
        y.push_back(data.labels[i]);
      }
      auto loss = [&](const std::vector<double>& v) {
        return kind == ModelKind::logistic ? oracle::logistic_loss(v, x, y, d, c)
                                           : oracle::mlp_loss(v, x, y, d, h, c);
      };
      const VectorXd g = gradient(p, data, batch);
      const auto fd = oracle::finite_difference(
          loss, std::vector<double>(p.values.data(), p.values.data() + p.values.size()));
      worst = std::max(worst, oracle::relative_error(
                                  std::vector<double>(g.data(), g.data() + g.size()), fd));
    }
  }
  const double elapsed = seconds_since(started);
  report(4, worst < 1e-5 && elapsed < 10.0, "analytic gradients match central finite differences",
         "worst relative error " + fmt(worst, 3) + " over " + std::to_string(instances) +
             " instances (logistic and mlp1), " + fmt(elapsed, 3) + " s");
}

void partition_check(const SimConfig& cfg, const LabeledDataset& train) {
  bool cover_ok = true;
  int partitions = 0;
  int skew_wins = 0;
  double low_sum = 0.0;
  double high_sum = 0.0;
  auto check_cover = [&](const std::vector<ClientShard>& shards) {
    std::vector<int> seen(train.size(), 0);
    for (const auto& sh : shards) {
      for (auto i : sh.sample_indices) {
        if (i >= seen.size()) {
          cover_ok = false;
          continue;
        }
        ++seen[i];
      }
    }
    cover_ok = cover_ok && std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; });
    ++partitions;
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    PartitionConfig pc = cfg.partition;
    pc.seed = seed;
    pc.alpha = 0.1;
    const auto low = dirichlet_partition(train, pc);
    pc.alpha = 10.0;
    const auto high = dirichlet_partition(train, pc);
    check_cover(low);
    check_cover(high);
    const double el = mean_client_entropy(low);
    const double eh = mean_client_entropy(high);
    low_sum += el;
    high_sum += eh;
    skew_wins += el < eh ? 1 : 0;
  }
  report(5, cover_ok && skew_wins == 20,
         "partitions are disjoint covers and alpha 0.1 is more skewed than alpha 10",
         std::to_string(partitions) + " partitions checked; mean entropy " + fmt(low_sum / 20) +
             " bits (alpha 0.1) vs " + fmt(high_sum / 20) + " bits (alpha 10), lower in " +
             std::to_string(skew_wins) + "/20 seeds");
}

void quantization_check() {
  rng::Stream s(505, "acceptance-quant");
  bool bound_ok = true;
  bool exact_ok = true;
  double worst_ratio = 0.0;
  for (int t = 0; t < 1000; ++t) {
    ModelUpdate u;
    u.num_samples = 1;
    VectorXd v(1 + static_cast<Eigen::Index>(s.below(200)));
    const double scale = std::pow(10.0, s.uniform(-3.0, 3.0));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * s.normal();
    u.new_params = ModelParams{ModelKind::logistic, {static_cast<int>(v.size()), 1, 0}, v};
    for (int bits : {8, 16}) {
      const double step = quantization_step(v, bits);
      const double err = (quantize_roundtrip(u, bits).new_params.values - v).cwiseAbs().maxCoeff();
      bound_ok = bound_ok && err <= step / 2.0;
      worst_ratio = std::max(worst_ratio, err / step);
    }
    exact_ok = exact_ok && quantize_roundtrip(u, 32).new_params == u.new_params;
  }
  report(6, bound_ok && exact_ok, "quantization error is within half a step; 32 bits is exact",
         "worst |error|/step " + fmt(worst_ratio, 4) + " over 1000 vectors at 8 and 16 bits; 32-bit " +
             (exact_ok ? "bit-identical" : "differs"));
}

void scheduling_check() {
  rng::Stream s(606, "acceptance-lpt");
  bool lpt_ok = true;
  double worst = 1.0;
  int instances = 0;
  for (int n = 1; n <= 8; ++n) {
    for (int k = 1; k <= 3; ++k) {
      for (int t = 0; t < 100; ++t, ++instances) {
        std::vector<ClientId> ids;
        std::map<ClientId, double> lat;
        std::vector<double> jobs;
        for (int i = 0; i < n; ++i) {
          // Mix continuous latencies with small integers, which produce ties.
          const double v = t % 2 == 0 ? s.uniform(1e-3, 1.0) : static_cast<double>(1 + s.below(6));
          ids.push_back(i);
          lat[i] = v;
          jobs.push_back(v);
        }
        const double opt = oracle::brute_force_makespan(jobs, k);
        const double got = makespan(assign_channels_lpt(ids, lat, k), lat);
        worst = std::max(worst, got / opt);
        lpt_ok = lpt_ok && got <= 4.0 / 3.0 * opt + 1e-12;
      }
    }
  }

  bool replay_ok = true;
  double worst_diff = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = 1 + static_cast<int>(s.below(12));
    const int k = 1 + static_cast<int>(s.below(5));
    std::vector<ClientId> ids;
    std::map<ClientId, double> est;
    std::vector<LinkReport> reports;
    std::map<int, oracle::Link> links;
    for (int i = 0; i < n; ++i) {
      LinkReport r;
      r.client_id = i;
      r.snr_db = s.uniform(10.0, 25.0);
      r.rate_bps = achievable_rate(5e6, r.snr_db);
      r.uplink_latency_s = transfer_latency(251200, r.rate_bps);
      r.downlink_latency_s = r.uplink_latency_s;
      r.dropped = s.bernoulli(0.3);
      ids.push_back(i);
      est[i] = r.uplink_latency_s;
      reports.push_back(r);
      links[i] = {i, r.downlink_latency_s, r.uplink_latency_s, r.dropped};
    }
    const auto a = assign_channels_lpt(ids, est, k);
    const double got = round_comm_latency(a, reports);
    const double want = oracle::event_replay(a.queues, links);
    worst_diff = std::max(worst_diff, std::abs(got - want) / want);
    replay_ok = replay_ok && std::abs(got - want) <= 1e-12 * want;
  }
  report(7, lpt_ok && replay_ok,
         "LPT within 4/3 of optimal; round latency matches an event replay",
         "worst LPT/optimal " + fmt(worst, 5) + " over " + std::to_string(instances) +
             " instances (n <= 8, K <= 3); worst replay relative gap " + fmt(worst_diff, 3) +
             " over 20 instances");
}

void coverage_check() {
  rng::Stream s(707, "acceptance-cover");
  const double bound = 1.0 - std::exp(-1.0);
  bool ok = true;
  double worst = 1.0;
  int instances = 0;
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + static_cast<int>(s.below(10));
    const int classes = 2 + static_cast<int>(s.below(9));
    std::vector<ClientProfile> ps;
    std::vector<std::vector<long>> hists;
    for (int i = 0; i < n; ++i) {
      std::vector<long> h(static_cast<std::size_t>(classes), 0);
      const double density = s.uniform(0.1, 0.6);
      for (auto& v : h) v = s.bernoulli(density) ? static_cast<long>(1 + s.below(50)) : 0;
      ClientProfile p;
      p.client_id = i;
      p.class_histogram = CountVector::Map(h.data(), classes);
      p.num_samples = p.class_histogram.sum();
      p.cumulative_participation = static_cast<std::int64_t>(s.below(4));
      ps.push_back(p);
      hists.push_back(h);
    }
    for (int k = 1; k <= 4; ++k, ++instances) {
      const int opt = oracle::brute_force_coverage(hists, k, 1);
      const int got = class_coverage(ps, select_class_diversity(ps, k, 1), 1);
      if (opt > 0) worst = std::min(worst, static_cast<double>(got) / opt);
      ok = ok && got >= bound * opt - 1e-12;
    }
  }
  report(8, ok, "greedy class coverage is within 1 - 1/e of the brute-force optimum",
         "worst greedy/optimal " + fmt(worst, 4) + " over " + std::to_string(instances) +
             " instances (n <= 10, k <= 4)");
}

void determinism_check(SimConfig cfg, const LabeledDataset& train, const LabeledDataset& test) {
  cfg.master_seed = 3;
  const auto a = run_simulation(cfg, train, test);
  const auto b = run_simulation(cfg, train, test);
  const bool identical = canonical(a) == canonical(b);

  bool fresh_ok = true;
  try {
    replay(a, train, test);
  } catch (const ReproducibilityError&) {
    fresh_ok = false;
  }
  auto tampered = a;
  tampered.rounds[4].metrics.test_accuracy += 1e-9;
  std::string caught;
  try {
    replay(tampered, train, test);
  } catch (const ReproducibilityError& e) {
    caught = e.field();
  }
  report(9, identical && fresh_ok && caught == "/rounds/4/metrics/test_accuracy",
         "identical inputs give byte-identical reports; replay detects tampering",
         std::string("reports ") + (identical ? "byte-identical" : "differ") + "; fresh replay " +
             (fresh_ok ? "passes" : "fails") + "; tampered replay " +
             (caught.empty() ? "passes" : "fails at " + caught));
}

void dropout_check() {
  WirelessConfig w;
  w.seed = 11;
  long dropped = 0;
  const long trials = 100000;
  for (long t = 0; t < trials; ++t) {
    dropped += client_drops(w, static_cast<int>(t / 15), static_cast<ClientId>(t % 15)) ? 1 : 0;
  }
  const double rate = static_cast<double>(dropped) / static_cast<double>(trials);
  report(11, std::abs(rate - 0.30) <= 0.01, "empirical dropout rate is 0.30 +/- 0.01",
         fmt(rate, 5) + " over " + std::to_string(trials) + " Bernoulli trials");
}

}  // namespace

int main() {
  // Table defaults with the bundled synthetic dataset.
  const SimConfig cfg = parse_config("dataset = synthetic\n");
  const auto [train, test] = load_data(cfg);
  std::printf("config: %d clients, alpha %g, %d channels, %g Hz/channel, dropout %g, SNR %g-%g dB, "
              "%d rounds, %s model, synthetic data %zu train / %zu test, D = %d\n",
              cfg.partition.num_clients, cfg.partition.alpha, cfg.wireless.num_channels,
              cfg.wireless.bandwidth_hz_per_channel, cfg.wireless.dropout_prob,
              cfg.wireless.snr_db_min, cfg.wireless.snr_db_max, cfg.rounds,
              std::string(to_string(cfg.model_kind)).c_str(), train.size(), test.size(),
              train.feature_dim());

  case_study(cfg, train, test, {1, 2, 3, 4, 5});
  gradient_check();
  partition_check(cfg, train);
  quantization_check();
  scheduling_check();
  coverage_check();
  determinism_check(cfg, train, test);
  dropout_check();

  for (const auto& [id, line] : results) std::printf("%s\n", line.c_str());
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
