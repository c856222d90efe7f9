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

// flsim: command-line front end for the federated learning simulator.
//
// Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "flsim/cli_io.hpp"

namespace {

using namespace flsim;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
  }
}

std::optional<std::string> dir_opt(const std::string& s) {
  return s.empty() ? std::nullopt : std::optional<std::string>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning over a bandwidth-constrained wireless cell"};
  app.require_subcommand(1);

  std::string config_path;
  std::string report_path;
  std::string data_dir;
  std::string out_path;
  std::string memory_path;
  std::string sim_format = "json";
  std::string cmp_format = "csv";
  std::string stats_format = "text";
  std::string rep_format = "json";
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
  std::vector<int> channels;
  unsigned threads = 0;

  auto* simulate = app.add_subcommand("simulate", "Run one simulation and write its report");
  simulate->add_option("config", config_path, "Config file (key = value)")->required();
  simulate->add_option("--data-dir", data_dir, "Directory holding the IDX files");
  simulate->add_option("--out,-o", out_path, "Report destination (default: stdout)");
  simulate->add_option("--format", sim_format, "json or csv")->capture_default_str();
  simulate->add_option("--memory", memory_path, "Also write the round memory as NDJSON");

  auto* compare = app.add_subcommand("compare", "Compare selection policies across seeds");
  compare->add_option("config", config_path, "Config file (key = value)")->required();
  compare->add_option("--policies", policies, "Policies to run (default: all four)")
      ->delimiter(',');
  compare->add_option("--seeds", seeds, "Master seeds (default: 1,2,3,4,5)")->delimiter(',');
  compare->add_option("--channels", channels, "Channel counts to sweep (default: config)")
      ->delimiter(',');
  compare->add_option("--data-dir", data_dir, "Directory holding the IDX files");
  compare->add_option("--out,-o", out_path, "Destination (default: stdout)");
  compare->add_option("--format", cmp_format, "csv or json")->capture_default_str();
  compare->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  auto* stats = app.add_subcommand("partition-stats", "Per-client partition statistics");
  stats->add_option("config", config_path, "Config file (key = value)")->required();
  stats->add_option("--data-dir", data_dir, "Directory holding the IDX files");
  stats->add_option("--format", stats_format, "text or csv")->capture_default_str();

  auto* replay_cmd = app.add_subcommand("replay", "Re-run a report's config and verify it");
  replay_cmd->add_option("report", report_path, "Report JSON file")->required();
  replay_cmd->add_option("--data-dir", data_dir, "Directory holding the IDX files");

  auto* report_cmd = app.add_subcommand("report", "Re-emit a stored report");
  report_cmd->add_option("report", report_path, "Report JSON file")->required();
  report_cmd->add_option("--format", rep_format, "json or csv")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // Enum-valued flags are checked before any work so that bad values map to
  // the usage exit code.
  ReportFormat report_fmt = ReportFormat::json;
  StatsFormat stats_fmt = StatsFormat::text;
  std::vector<Policy> chosen;
  try {
    if (simulate->parsed()) report_fmt = report_format_from_string(sim_format);
    if (compare->parsed()) report_fmt = report_format_from_string(cmp_format);
    if (report_cmd->parsed()) report_fmt = report_format_from_string(rep_format);
    if (stats->parsed()) stats_fmt = stats_format_from_string(stats_format);
    for (const auto& p : policies) chosen.push_back(policy_from_string(p));
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      const ReportFormat fmt = report_fmt;
      const SimConfig cfg = parse_config_file(config_path);
      const auto [train, test] = load_data(cfg, dir_opt(data_dir));
      SimulationReport report;
      try {
        report = run_simulation(cfg, train, test);
      } catch (const SimulationAborted& e) {
        if (!out_path.empty()) emit(emit_report(e.partial(), fmt), out_path);
        throw;
      }
      emit(emit_report(report, fmt), out_path);
      if (!memory_path.empty()) {
        MemoryStore memory;
        for (const auto& r : report.rounds) memory.append(r);
        write_text_file(memory_path, memory.to_ndjson());
      }
    } else if (compare->parsed()) {
      const ReportFormat fmt = report_fmt;
      const SimConfig cfg = parse_config_file(config_path);
      if (chosen.empty()) chosen.assign(std::begin(kAllPolicies), std::end(kAllPolicies));
      if (seeds.empty()) seeds = {1, 2, 3, 4, 5};
      const auto [train, test] = load_data(cfg, dir_opt(data_dir));
      const ComparisonReport result =
          run_comparison(cfg, chosen, seeds, channels, train, test, threads);
      emit(emit_comparison(result, fmt), out_path);
    } else if (stats->parsed()) {
      const StatsFormat fmt = stats_fmt;
      const SimConfig cfg = parse_config_file(config_path);
      const auto [train, test] = load_data(cfg, dir_opt(data_dir));
      std::cout << partition_stats(cfg, train, fmt);
    } else if (replay_cmd->parsed()) {
      const SimulationReport fresh = replay_file(report_path, dir_opt(data_dir));
      std::cout << "replay ok: " << fresh.rounds.size() << " rounds, final accuracy "
                << format_double(fresh.summary.final_accuracy) << '\n';
    } else if (report_cmd->parsed()) {
      std::cout << emit_report(read_report_file(report_path), report_fmt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
