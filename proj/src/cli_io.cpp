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

#include "flsim/cli_io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

namespace flsim {

namespace {

enum class ValueKind { integer, real, text };

struct ConfigKey {
  std::string name;
  ValueKind kind;
  std::function<std::string(const SimConfig&)> get;
  std::function<void(SimConfig&, std::string_view)> set;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& field) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(field + ": cannot parse '" + std::string(text) + "'", field);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError(field + ": must be finite", field);
  }
  return value;
}

template <typename T>
std::string number_text(T value) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(value);
  } else {
    return std::to_string(value);
  }
}

// `access` is a generic lambda returning a reference to the field; it is
// used with both const and mutable configs.
template <typename T, typename Access>
ConfigKey number_key(std::string name, Access access) {
  const ValueKind kind = std::is_floating_point_v<T> ? ValueKind::real : ValueKind::integer;
  return {name, kind, [access](const SimConfig& c) { return number_text<T>(access(c)); },
          [access, name](SimConfig& c, std::string_view v) {
            access(c) = parse_number<T>(v, name);
          }};
}

template <typename Access>
ConfigKey text_key(std::string name, Access access) {
  return {name, ValueKind::text, [access](const SimConfig& c) { return std::string(access(c)); },
          [access](SimConfig& c, std::string_view v) { access(c) = std::string(v); }};
}

const std::vector<ConfigKey>& key_table() {
  static const std::vector<ConfigKey> table = [] {
    std::vector<ConfigKey> t;
    // Partition
    t.push_back(number_key<int>("num_clients", [](auto& c) -> auto& { return c.partition.num_clients; }));
    t.push_back(number_key<double>("alpha", [](auto& c) -> auto& { return c.partition.alpha; }));
    t.push_back(number_key<int>("min_samples_per_client",
                                [](auto& c) -> auto& { return c.partition.min_samples_per_client; }));
    // Wireless
    t.push_back(number_key<double>("bandwidth_hz",
                                   [](auto& c) -> auto& { return c.wireless.bandwidth_hz_per_channel; }));
    t.push_back(number_key<int>("num_channels", [](auto& c) -> auto& { return c.wireless.num_channels; }));
    t.push_back(number_key<double>("snr_db_min", [](auto& c) -> auto& { return c.wireless.snr_db_min; }));
    t.push_back(number_key<double>("snr_db_max", [](auto& c) -> auto& { return c.wireless.snr_db_max; }));
    t.push_back(number_key<double>("dropout_prob", [](auto& c) -> auto& { return c.wireless.dropout_prob; }));
    t.push_back(number_key<std::int64_t>("header_bits", [](auto& c) -> auto& { return c.wireless.header_bits; }));
    // Model and local training
    t.push_back({"model", ValueKind::text,
                 [](const SimConfig& c) { return std::string(to_string(c.model_kind)); },
                 [](SimConfig& c, std::string_view v) {
                   try {
                     c.model_kind = model_kind_from_string(v);
                   } catch (const DomainError& e) {
                     throw ConfigError(std::string("model: ") + e.what(), "model");
                   }
                 }});
    t.push_back(number_key<int>("hidden_units", [](auto& c) -> auto& { return c.hidden_units; }));
    t.push_back(number_key<double>("learning_rate", [](auto& c) -> auto& { return c.hyper.learning_rate; }));
    t.push_back(number_key<int>("batch_size", [](auto& c) -> auto& { return c.hyper.batch_size; }));
    t.push_back(number_key<int>("local_epochs", [](auto& c) -> auto& { return c.hyper.local_epochs; }));
    t.push_back(number_key<int>("max_local_epochs", [](auto& c) -> auto& { return c.max_local_epochs; }));
    // Control loop
    t.push_back(number_key<int>("rounds", [](auto& c) -> auto& { return c.rounds; }));
    t.push_back({"policy", ValueKind::text,
                 [](const SimConfig& c) { return std::string(to_string(c.policy)); },
                 [](SimConfig& c, std::string_view v) {
                   try {
                     c.policy = policy_from_string(v);
                   } catch (const DomainError& e) {
                     throw ConfigError(std::string("policy: ") + e.what(), "policy");
                   }
                 }});
    t.push_back({"k", ValueKind::integer,
                 [](const SimConfig& c) { return std::to_string(c.k.value_or(0)); },
                 [](SimConfig& c, std::string_view v) {
                   const int k = parse_number<int>(v, "k");
                   if (k < 0) throw ConfigError("k: must be >= 0", "k");
                   c.k = k == 0 ? std::nullopt : std::optional<int>(k);
                 }});
    t.push_back(number_key<int>("quant_bits", [](auto& c) -> auto& { return c.quant_bits; }));
    t.push_back(number_key<double>("filter_multiplier", [](auto& c) -> auto& { return c.filter_multiplier; }));
    t.push_back(number_key<double>("plateau_epsilon", [](auto& c) -> auto& { return c.plateau_epsilon; }));
    t.push_back(number_key<int>("patience", [](auto& c) -> auto& { return c.patience; }));
    t.push_back(number_key<double>("latency_budget_s", [](auto& c) -> auto& { return c.latency_budget_s; }));
    t.push_back(number_key<double>("compute_speed_min", [](auto& c) -> auto& { return c.compute_speed_min; }));
    t.push_back(number_key<double>("compute_speed_max", [](auto& c) -> auto& { return c.compute_speed_max; }));
    t.push_back(number_key<std::int64_t>("coverage_threshold",
                                         [](auto& c) -> auto& { return c.coverage_threshold; }));
    t.push_back(number_key<double>("unit_reward", [](auto& c) -> auto& { return c.unit_reward; }));
    t.push_back(number_key<std::uint64_t>("master_seed", [](auto& c) -> auto& { return c.master_seed; }));
    // Data
    t.push_back({"dataset", ValueKind::text,
                 [](const SimConfig& c) {
                   return std::string(c.data.source == DatasetSource::idx ? "idx" : "synthetic");
                 },
                 [](SimConfig& c, std::string_view v) {
                   if (v == "idx") {
                     c.data.source = DatasetSource::idx;
                   } else if (v == "synthetic") {
                     c.data.source = DatasetSource::synthetic;
                   } else {
                     throw ConfigError("dataset: expected idx or synthetic", "dataset");
                   }
                 }});
    t.push_back(text_key("data_dir", [](auto& c) -> auto& { return c.data.data_dir; }));
    t.push_back(text_key("train_images", [](auto& c) -> auto& { return c.data.train_images; }));
    t.push_back(text_key("train_labels", [](auto& c) -> auto& { return c.data.train_labels; }));
    t.push_back(text_key("test_images", [](auto& c) -> auto& { return c.data.test_images; }));
    t.push_back(text_key("test_labels", [](auto& c) -> auto& { return c.data.test_labels; }));
    t.push_back(number_key<std::size_t>("subsample_size", [](auto& c) -> auto& { return c.data.subsample_size; }));
    t.push_back(number_key<int>("synthetic_classes", [](auto& c) -> auto& { return c.data.synthetic.num_classes; }));
    t.push_back(number_key<int>("synthetic_samples_per_class",
                                [](auto& c) -> auto& { return c.data.synthetic.samples_per_class; }));
    t.push_back(number_key<int>("synthetic_test_per_class",
                                [](auto& c) -> auto& { return c.data.synthetic_test_per_class; }));
    t.push_back(number_key<int>("synthetic_feature_dim",
                                [](auto& c) -> auto& { return c.data.synthetic.feature_dim; }));
    t.push_back(number_key<double>("synthetic_separation",
                                   [](auto& c) -> auto& { return c.data.synthetic.separation; }));
    t.push_back(number_key<std::uint64_t>("data_seed", [](auto& c) -> auto& { return c.data.data_seed; }));
    return t;
  }();
  return table;
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string csv_row(const ComparisonRow& r) {
  std::string line(to_string(r.policy));
  line += ',' + std::to_string(r.seed);
  line += ',' + std::to_string(r.num_channels);
  line += ',' + format_double(r.avg_selected_snr_db);
  line += ',' + format_double(r.avg_comm_latency_s);
  line += ',' + format_double(r.final_test_accuracy);
  line += '\n';
  return line;
}

ComparisonRow row_of(const SimulationReport& r) {
  return {r.config.policy,
          r.config.master_seed,
          r.config.wireless.num_channels,
          r.summary.mean_selected_snr_db,
          r.summary.mean_round_comm_latency_s,
          r.summary.final_accuracy};
}

}  // namespace

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  throw DomainError("unknown report format '" + std::string(name) + "'");
}

StatsFormat stats_format_from_string(std::string_view name) {
  if (name == "text") return StatsFormat::text;
  if (name == "csv") return StatsFormat::csv;
  throw DomainError("unknown stats format '" + std::string(name) + "'");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.name);
  return out;
}

SimConfig parse_config(std::string_view text) {
  SimConfig cfg;
  std::map<std::string, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", {},
                        line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const ConfigKey* entry = find_key(key);
    if (entry == nullptr) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'", key,
                        line_no);
    }
    if (seen.count(key) != 0) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'",
                        key, line_no);
    }
    seen[key] = line_no;
    try {
      entry->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what(), e.field(), line_no);
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const auto it = seen.find(e.field());
    if (it == seen.end()) throw;
    throw ConfigError("line " + std::to_string(it->second) + ": " + e.what(), e.field(),
                      it->second);
  }
  return cfg;
}

SimConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const SimConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += '\n';
  }
  return out;
}

json config_to_json(const SimConfig& cfg) {
  json j = json::object();
  for (const auto& k : key_table()) {
    const std::string v = k.get(cfg);
    switch (k.kind) {
      case ValueKind::text: j[k.name] = v; break;
      case ValueKind::real: j[k.name] = parse_number<double>(v, k.name); break;
      case ValueKind::integer:
        if (!v.empty() && v.front() == '-') {
          j[k.name] = parse_number<std::int64_t>(v, k.name);
        } else {
          j[k.name] = parse_number<std::uint64_t>(v, k.name);
        }
        break;
    }
  }
  return j;
}

SimConfig config_from_json(const json& j) {
  SimConfig cfg;
  for (const auto& [name, value] : j.items()) {
    const ConfigKey* entry = find_key(name);
    if (entry == nullptr) throw ConfigError("unknown config key '" + name + "'", name);
    entry->set(cfg, value.is_string() ? value.get<std::string>() : value.dump());
  }
  cfg.validate();
  return cfg;
}

std::pair<LabeledDataset, LabeledDataset> load_data(
    const SimConfig& cfg, const std::optional<std::string>& data_dir_override) {
  const DataConfig& dc = cfg.data;
  LabeledDataset train;
  LabeledDataset test;
  if (dc.source == DatasetSource::synthetic) {
    SyntheticSpec test_spec = dc.synthetic;
    test_spec.samples_per_class = dc.synthetic_test_per_class;
    train = synth_dataset(dc.synthetic, dc.data_seed, "train");
    test = synth_dataset(test_spec, dc.data_seed, "test");
  } else {
    std::filesystem::path dir = ".";
    if (data_dir_override && !data_dir_override->empty()) {
      dir = *data_dir_override;
    } else if (!dc.data_dir.empty()) {
      dir = dc.data_dir;
    } else if (const char* env = std::getenv("FLSIM_DATA_DIR"); env != nullptr && *env) {
      dir = env;
    }
    train = load_idx_files(dir / dc.train_images, dir / dc.train_labels);
    test = load_idx_files(dir / dc.test_images, dir / dc.test_labels);
    const int classes = std::max(train.num_classes, test.num_classes);
    train.num_classes = classes;
    test.num_classes = classes;
  }
  if (dc.subsample_size > 0) train = subsample(train, dc.subsample_size, dc.data_seed);
  return {std::move(train), std::move(test)};
}

json report_to_json(const SimulationReport& report) {
  const auto& s = report.summary;
  return json{{"config", config_to_json(report.config)},
              {"initial_accuracy", report.initial_accuracy},
              {"initial_loss", report.initial_loss},
              {"rounds", report.rounds},
              {"summary",
               {{"final_accuracy", s.final_accuracy},
                {"mean_selected_snr_db", s.mean_selected_snr_db},
                {"mean_round_comm_latency_s", s.mean_round_comm_latency_s},
                {"mean_round_compute_latency_s", s.mean_round_compute_latency_s},
                {"total_payload_bits", s.total_payload_bits}}},
              {"aborted", report.aborted},
              {"wall_time_s", report.wall_time_s}};
}

SimulationReport report_from_json(const json& j, bool check_summary) {
  SimulationReport r;
  try {
    r.config = config_from_json(j.at("config"));
    j.at("initial_accuracy").get_to(r.initial_accuracy);
    j.at("initial_loss").get_to(r.initial_loss);
    j.at("rounds").get_to(r.rounds);
    const json& s = j.at("summary");
    s.at("final_accuracy").get_to(r.summary.final_accuracy);
    s.at("mean_selected_snr_db").get_to(r.summary.mean_selected_snr_db);
    s.at("mean_round_comm_latency_s").get_to(r.summary.mean_round_comm_latency_s);
    s.at("mean_round_compute_latency_s").get_to(r.summary.mean_round_compute_latency_s);
    s.at("total_payload_bits").get_to(r.summary.total_payload_bits);
    j.at("aborted").get_to(r.aborted);
    j.at("wall_time_s").get_to(r.wall_time_s);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  if (check_summary && !(summarize(r.initial_accuracy, r.rounds) == r.summary)) {
    throw ConsistencyError("report summary does not match its round records");
  }
  return r;
}

json comparison_to_json(const ComparisonReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"policy", std::string(to_string(r.policy))},
                    {"seed", r.seed},
                    {"num_channels", r.num_channels},
                    {"avg_selected_snr_db", r.avg_selected_snr_db},
                    {"avg_comm_latency_s", r.avg_comm_latency_s},
                    {"final_test_accuracy", r.final_test_accuracy}});
  }
  json aggs = json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"policy", std::string(to_string(a.policy))},
                    {"num_channels", a.num_channels},
                    {"runs", a.runs},
                    {"mean_snr_db", a.mean_snr_db},
                    {"mean_comm_latency_s", a.mean_comm_latency_s},
                    {"mean_final_accuracy", a.mean_final_accuracy},
                    {"median_snr_db", a.median_snr_db},
                    {"median_comm_latency_s", a.median_comm_latency_s},
                    {"median_final_accuracy", a.median_final_accuracy}});
  }
  return json{{"rows", rows}, {"aggregates", aggs}};
}

std::string emit_report(const SimulationReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return report_to_json(report).dump(2) + '\n';
  std::string out(kCsvHeader);
  out += '\n';
  out += csv_row(row_of(report));
  return out;
}

std::string emit_comparison(const ComparisonReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return comparison_to_json(report).dump(2) + '\n';
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : report.rows) out += csv_row(r);
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

SimulationReport read_report_file(const std::filesystem::path& path, bool check_summary) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  return report_from_json(j, check_summary);
}

std::string partition_stats(const SimConfig& cfg, const LabeledDataset& train,
                            StatsFormat format) {
  const World world = make_world(cfg, train);
  const int classes = train.num_classes;
  std::ostringstream out;
  out.imbue(std::locale::classic());
  if (format == StatsFormat::csv) {
    out << "client_id,num_samples,label_entropy_bits";
    for (int c = 0; c < classes; ++c) out << ",class_" << c;
    out << '\n';
    for (const auto& s : world.shards) {
      out << s.client_id << ',' << s.size() << ',' << format_double(label_entropy(s.class_histogram));
      for (int c = 0; c < classes; ++c) out << ',' << s.class_histogram(c);
      out << '\n';
    }
    return out.str();
  }

  CountVector global = CountVector::Zero(classes);
  for (int y : train.labels) ++global(y);
  out << "# clients=" << world.shards.size() << " alpha=" << format_double(cfg.partition.alpha)
      << " samples=" << train.size() << " seed=" << cfg.master_seed << '\n';
  out << std::setw(6) << "client" << std::setw(9) << "samples" << std::setw(10) << "entropy";
  for (int c = 0; c < classes; ++c) out << std::setw(7) << ("c" + std::to_string(c));
  out << '\n';
  for (const auto& s : world.shards) {
    std::ostringstream ent;
    ent.imbue(std::locale::classic());
    ent << std::fixed << std::setprecision(4) << label_entropy(s.class_histogram);
    out << std::setw(6) << s.client_id << std::setw(9) << s.size() << std::setw(10) << ent.str();
    for (int c = 0; c < classes; ++c) out << std::setw(7) << s.class_histogram(c);
    out << '\n';
  }
  out << "# mean_client_entropy_bits=" << format_double(mean_client_entropy(world.shards))
      << " global_entropy_bits=" << format_double(label_entropy(global)) << '\n';
  return out.str();
}

SimulationReport replay_file(const std::filesystem::path& path,
                             const std::optional<std::string>& data_dir_override) {
  const SimulationReport recorded = read_report_file(path, false);
  const auto [train, test] = load_data(recorded.config, data_dir_override);
  return replay(recorded, train, test);
}

}  // namespace flsim
