#include "consmax/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "consmax/errors.hpp"

namespace consmax::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Collects schema issues for one JSON object.
class ObjectReader {
 public:
  ObjectReader(const json& doc, std::string path, std::vector<std::string>& issues)
      : doc_(doc), path_(std::move(path)), issues_(issues) {}

  void reject_unknown(const std::set<std::string>& known) const {
    for (const auto& [key, _] : doc_.items()) {
      if (!known.count(key)) issues_.push_back(at(key) + ": unknown field");
    }
  }

  void read(const char* key, std::uint64_t& out) const {
    if (!doc_.contains(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_number_unsigned()) {
      issues_.push_back(at(key) + ": expected a non-negative integer");
      return;
    }
    out = v.get<std::uint64_t>();
  }

  void read(const char* key, double& out) const {
    if (!doc_.contains(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_number()) {
      issues_.push_back(at(key) + ": expected a number");
      return;
    }
    out = v.get<double>();
  }

  void read(const char* key, std::vector<double>& out) const {
    if (!doc_.contains(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_array()) {
      issues_.push_back(at(key) + ": expected an array of numbers");
      return;
    }
    std::vector<double> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        issues_.push_back(at(key) + "[" + std::to_string(i) + "]: expected a number");
        return;
      }
      values.push_back(v[i].get<double>());
    }
    out = std::move(values);
  }

  // Returns the string value, or empty when absent or mistyped.
  std::string read_string(const char* key) const {
    if (!doc_.contains(key)) return {};
    const auto& v = doc_.at(key);
    if (!v.is_string()) {
      issues_.push_back(at(key) + ": expected a string");
      return {};
    }
    return v.get<std::string>();
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }
  bool has(const char* key) const { return doc_.contains(key); }

 private:
  const json& doc_;
  std::string path_;
  std::vector<std::string>& issues_;
};

// Re-roots "$.field: ..." messages under `path`.
void absorb(const ConfigError& e, const std::string& path, std::vector<std::string>& issues) {
  for (const auto& issue : e.issues()) {
    issues.push_back(issue.rfind("$", 0) == 0 ? path + issue.substr(1) : issue);
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& doc, const std::string& path) {
  if (!doc.is_object()) throw ConfigError(path, "expected an object");
  std::vector<std::string> issues;
  ObjectReader r(doc, path, issues);
  r.reject_unknown({"num_keys", "num_queries", "tile_size", "lat_qk", "lat_norm", "lat_pv",
                    "sync_cost", "normalizer", "block_size", "mode"});

  PipelineConfig cfg;
  r.read("num_keys", cfg.num_keys);
  r.read("num_queries", cfg.num_queries);
  r.read("tile_size", cfg.tile_size);
  r.read("lat_qk", cfg.lat_qk);
  r.read("lat_norm", cfg.lat_norm);
  r.read("lat_pv", cfg.lat_pv);
  r.read("sync_cost", cfg.sync_cost);

  const std::string normalizer = r.has("normalizer") ? r.read_string("normalizer") : "consmax";
  if (normalizer == "softmax") {
    cfg.normalizer = Normalizer::softmax();
  } else if (normalizer == "consmax") {
    cfg.normalizer = Normalizer::consmax();
  } else if (normalizer == "partial") {
    std::uint64_t block = 0;
    if (!r.has("block_size")) issues.push_back(r.at("block_size") + ": required for partial");
    r.read("block_size", block);
    cfg.normalizer = Normalizer::partial(block == 0 ? 1 : block);
    if (r.has("block_size") && block == 0) issues.push_back(r.at("block_size") + ": must be >= 1");
  } else if (!normalizer.empty()) {
    issues.push_back(r.at("normalizer") + ": expected softmax, partial or consmax, got '" +
                     normalizer + "'");
  }

  const std::string mode = r.read_string("mode");
  if (mode == "summarization") {
    cfg.mode = PipelineMode::summarization;
  } else if (!mode.empty() && mode != "generation") {
    issues.push_back(r.at("mode") + ": expected generation or summarization, got '" + mode + "'");
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    absorb(e, path, issues);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  json j;
  j["num_keys"] = cfg.num_keys;
  j["num_queries"] = cfg.num_queries;
  j["tile_size"] = cfg.tile_size;
  j["lat_qk"] = cfg.lat_qk;
  j["lat_norm"] = cfg.lat_norm;
  j["lat_pv"] = cfg.lat_pv;
  j["sync_cost"] = cfg.sync_cost;
  switch (cfg.normalizer.kind) {
    case NormalizerKind::softmax: j["normalizer"] = "softmax"; break;
    case NormalizerKind::consmax: j["normalizer"] = "consmax"; break;
    case NormalizerKind::partial:
      j["normalizer"] = "partial";
      j["block_size"] = cfg.normalizer.block_size;
      break;
  }
  j["mode"] = to_string(cfg.mode);
  return j;
}

json to_json(const SimReport& report) {
  json j;
  j["normalizer"] = report.config.normalizer.label();
  j["config"] = to_json(report.config);
  j["total_cycles"] = report.total_cycles;
  json stages = json::object();
  for (Stage s : {Stage::qk, Stage::norm, Stage::pv}) {
    stages[to_string(s)] = {{"elements", report.stage(s).elements},
                            {"busy_cycles", report.stage(s).busy_cycles},
                            {"utilization", report.utilization(s)}};
  }
  j["stages"] = stages;
  j["first_pv_start"] = report.first_pv_start;
  j["sync_ops"] = report.sync_ops;
  j["sync_cycles"] = report.sync_cycles;
  j["sync_fraction"] = report.sync_fraction;
  return j;
}

json to_json(const ComparisonTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = to_json(row.report);
    r["speedup"] = row.speedup;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string sim_csv(std::span<const SimReport> reports, std::span<const double> speedups) {
  std::string out =
      "normalizer,mode,num_keys,num_queries,tile_size,sync_cost,total_cycles,busy_qk,busy_norm,"
      "busy_pv,util_qk,util_norm,util_pv,first_pv_start,sync_ops,sync_cycles,sync_fraction";
  if (!speedups.empty()) out += ",speedup";
  out += '\n';
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const SimReport& r = reports[i];
    const PipelineConfig& c = r.config;
    out += r.config.normalizer.label() + ',' + to_string(c.mode) + ',' +
           std::to_string(c.num_keys) + ',' + std::to_string(c.num_queries) + ',' +
           std::to_string(c.tile_size) + ',' + std::to_string(c.sync_cost) + ',' +
           std::to_string(r.total_cycles);
    for (Stage s : {Stage::qk, Stage::norm, Stage::pv}) {
      out += ',' + std::to_string(r.stage(s).busy_cycles);
    }
    for (Stage s : {Stage::qk, Stage::norm, Stage::pv}) out += ',' + format_double(r.utilization(s));
    out += ',' + std::to_string(r.first_pv_start) + ',' + std::to_string(r.sync_ops) + ',' +
           std::to_string(r.sync_cycles) + ',' + format_double(r.sync_fraction);
    if (!speedups.empty()) out += ',' + format_double(speedups[i]);
    out += '\n';
  }
  return out;
}

TrainConfig train_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("$", "expected an object");
  std::vector<std::string> issues;
  ObjectReader r(doc, "$", issues);
  r.reject_unknown({"seed", "iterations", "learning_rate", "beta_init_grid", "gamma_init",
                    "gamma_init_grid", "warmup_iters", "task"});

  TrainConfig cfg;
  r.read("seed", cfg.seed);
  r.read("iterations", cfg.iterations);
  r.read("learning_rate", cfg.learning_rate);
  r.read("beta_init_grid", cfg.beta_init_grid);
  if (r.has("gamma_init") && r.has("gamma_init_grid")) {
    issues.push_back("$.gamma_init: give either gamma_init or gamma_init_grid, not both");
  }
  if (r.has("gamma_init")) {
    double g = cfg.gamma_init_grid.front();
    r.read("gamma_init", g);
    cfg.gamma_init_grid = {g};
  }
  r.read("gamma_init_grid", cfg.gamma_init_grid);
  r.read("warmup_iters", cfg.warmup_iters);

  if (doc.contains("task")) {
    const json& task = doc.at("task");
    if (!task.is_object()) {
      issues.push_back("$.task: expected an object");
    } else {
      ObjectReader t(task, "$.task", issues);
      t.reject_unknown({"seq_len", "dim", "train_samples", "val_samples", "label_noise"});
      t.read("seq_len", cfg.task.seq_len);
      t.read("dim", cfg.task.dim);
      t.read("train_samples", cfg.task.train_samples);
      t.read("val_samples", cfg.task.val_samples);
      t.read("label_noise", cfg.task.label_noise);
    }
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    absorb(e, "$", issues);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["iterations"] = cfg.iterations;
  j["learning_rate"] = cfg.learning_rate;
  j["beta_init_grid"] = cfg.beta_init_grid;
  j["gamma_init_grid"] = cfg.gamma_init_grid;
  j["warmup_iters"] = cfg.warmup_iters;
  j["task"] = {{"seq_len", cfg.task.seq_len},
               {"dim", cfg.task.dim},
               {"train_samples", cfg.task.train_samples},
               {"val_samples", cfg.task.val_samples},
               {"label_noise", cfg.task.label_noise}};
  return j;
}

std::string trace_csv(const TrainTrace& trace) {
  std::string out = "iteration,loss,beta,gamma\n";
  for (std::size_t i = 0; i < trace.loss_curve.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(trace.loss_curve[i]) + ',' +
           format_double(trace.beta_curve[i]) + ',' + format_double(trace.gamma_curve[i]) + '\n';
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "beta,gamma,validation_loss\n";
  for (const auto& e : sweep.table) {
    out += format_double(e.beta) + ',' + format_double(e.gamma) + ',' +
           format_double(e.validation_loss) + '\n';
  }
  return out;
}

json to_json(const LutErrorStats& stats) {
  json j;
  j["max_rel_error"] = stats.max_rel_error;
  j["mean_rel_error"] = stats.mean_rel_error;
  j["max_ulp_diff_vs_direct"] = stats.max_ulp_diff_vs_direct;
  j["samples"] = stats.samples;
  return j;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::vector<double>> parse_score_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t eol = text.find('\n');
    const std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (line.empty() || line.front() == '#') continue;

    std::vector<double> row;
    std::string_view rest = line;
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view field = trim(rest.substr(0, comma));
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw InvalidArgument("line " + std::to_string(line_no) + ": invalid number '" +
                              std::string(field) + "'");
      }
      if (!std::isfinite(v)) {
        throw InvalidArgument("line " + std::to_string(line_no) + ": non-finite score '" +
                              std::string(field) + "'");
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("no score rows");
  return rows;
}

std::vector<std::vector<double>> parse_score_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(e.what());
  }
  if (!doc.is_array()) throw InvalidArgument("$: expected an array of score rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string at = "$[" + std::to_string(i) + "]";
    if (!doc[i].is_array() || doc[i].empty()) {
      throw InvalidArgument(at + ": expected a non-empty array of numbers");
    }
    std::vector<double> row;
    for (std::size_t j = 0; j < doc[i].size(); ++j) {
      if (!doc[i][j].is_number()) {
        throw InvalidArgument(at + "[" + std::to_string(j) + "]: expected a number");
      }
      row.push_back(doc[i][j].get<double>());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("no score rows");
  return rows;
}

}  // namespace consmax::io
