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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flsim/orchestrator.hpp"
#include "flsim/serialization.hpp"

namespace flsim {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitRuntime = 4;

enum class ReportFormat { json, csv };
enum class StatsFormat { text, csv };

ReportFormat report_format_from_string(std::string_view name);
StatsFormat stats_format_from_string(std::string_view name);

/// Locale-independent shortest round-trip decimal.
std::string format_double(double value);

/// Config keys in documentation order.
std::vector<std::string> config_keys();

/// Flat "key = value" text; '#' starts a comment. Unknown or repeated keys
/// and malformed lines raise ConfigError with the line number; missing keys
/// keep their defaults. The parsed config is range-checked.
SimConfig parse_config(std::string_view text);
SimConfig parse_config_file(const std::filesystem::path& path);

/// Every key, one per line, in config_keys() order.
std::string serialize_config(const SimConfig& cfg);

json config_to_json(const SimConfig& cfg);
SimConfig config_from_json(const json& j);

/// Loads (train, test). IDX files are looked up in, by priority, the
/// override, the config's data_dir, $FLSIM_DATA_DIR, then ".".
std::pair<LabeledDataset, LabeledDataset> load_data(
    const SimConfig& cfg, const std::optional<std::string>& data_dir_override = std::nullopt);

json report_to_json(const SimulationReport& report);
/// Rebuilds a report. With `check_summary`, a summary that does not match
/// the recomputation from the records raises ConsistencyError.
SimulationReport report_from_json(const json& j, bool check_summary = true);

json comparison_to_json(const ComparisonReport& report);

inline constexpr std::string_view kCsvHeader =
    "policy,seed,num_channels,avg_selected_snr_db,avg_comm_latency_s,final_test_accuracy";

/// JSON: sorted keys, shortest round-trip doubles, trailing newline.
/// CSV: header plus one row, LF line endings.
std::string emit_report(const SimulationReport& report, ReportFormat format);
std::string emit_comparison(const ComparisonReport& report, ReportFormat format);

SimulationReport read_report_file(const std::filesystem::path& path, bool check_summary = true);

/// Per-client sizes, label entropies (bits) and class histograms.
std::string partition_stats(const SimConfig& cfg, const LabeledDataset& train,
                            StatsFormat format);

/// Loads a report file, reloads its data and replays it.
SimulationReport replay_file(const std::filesystem::path& path,
                             const std::optional<std::string>& data_dir_override = std::nullopt);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace flsim
