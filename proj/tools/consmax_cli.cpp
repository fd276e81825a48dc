// consmax: command-line front end for the normalizer library, the LUT
// hardware model, the pipeline simulator and the toy trainer.
//
// Exit codes: 0 success, 2 config/input error, 3 --check failure, 1 other.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "consmax/errors.hpp"
#include "consmax/io.hpp"
#include "consmax/lut_unit.hpp"
#include "consmax/pipeline_sim.hpp"
#include "consmax/softmax.hpp"
#include "consmax/train.hpp"

namespace fs = std::filesystem;
using consmax::io::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw consmax::InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw consmax::ConfigError("$", std::string("invalid JSON in '") + path + "': " + e.what());
  }
}

// Collects artifacts of one command and writes them plus manifest.json.
class Run {
 public:
  Run(std::string command, std::string out_dir, std::string config_path, std::string config_key)
      : command_(std::move(command)),
        out_dir_(std::move(out_dir)),
        config_path_(std::move(config_path)),
        hash_(consmax::io::fnv1a_hex(config_key)) {
    fs::create_directories(out_dir_);
  }

  const std::string& hash() const { return hash_; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = fs::path(out_dir_) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << content;
    outputs_.push_back(name);
  }

  void write_json(const std::string& name, json doc) {
    doc["config_hash"] = hash_;
    write(name, doc.dump(2) + "\n");
  }

  void finish() {
    json m;
    m["command"] = command_;
    m["config_path"] = config_path_;
    m["outputs"] = outputs_;
    m["tool_version"] = kToolVersion;
    m["config_hash"] = hash_;
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["created_utc"] = stamp;
    std::ofstream out(fs::path(out_dir_) / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
  }

 private:
  std::string command_;
  std::string out_dir_;
  std::string config_path_;
  std::string hash_;
  std::vector<std::string> outputs_;
};

std::string join_row(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += consmax::io::format_double(v[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct NormalizeArgs {
  std::string input;
  std::string mode = "softmax";
  double beta = 0.0;
  double gamma = 1.0;
  double c = 0.0;
  std::size_t block_size = 0;
  std::string out_dir = "out";
};

int cmd_normalize(const NormalizeArgs& a) {
  const std::string text = read_file(a.input);
  const bool is_json = fs::path(a.input).extension() == ".json";
  const auto rows = is_json ? consmax::io::parse_score_json(text) : consmax::io::parse_score_csv(text);

  std::ostringstream key;
  key << text << "|" << a.mode << "|" << a.beta << "|" << a.gamma << "|" << a.c << "|" << a.block_size;
  Run run("normalize", a.out_dir, a.input, key.str());

  std::string csv;
  json per_row = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    consmax::ScoreVector scores(rows[i]);
    consmax::NormVector out;
    if (a.mode == "softmax") {
      out = consmax::softmax(scores);
    } else if (a.mode == "consmax") {
      out = consmax::consmax_train(scores, consmax::ConsmaxParams{a.beta, a.gamma, std::nullopt});
    } else if (a.mode == "consmax-infer") {
      const double c = a.c > 0.0 ? a.c : consmax::merge_constants(a.beta, a.gamma);
      out = consmax::consmax_infer(scores, c);
    } else {
      const std::size_t block = a.block_size == 0 ? scores.size() : a.block_size;
      out = consmax::partial_softmax(scores, block).first;
    }
    csv += join_row(out.values) + "\n";
    per_row.push_back({{"row", i + 1},
                       {"length", out.values.size()},
                       {"sum", out.sum()},
                       {"normalized", out.normalized}});
  }
  std::cout << csv;
  run.write("normalized.csv", csv);
  json summary;
  summary["mode"] = a.mode;
  summary["rows"] = rows.size();
  summary["per_row"] = per_row;
  run.write_json("normalize_summary.json", summary);
  run.finish();
  return kExitOk;
}

struct LutArgs {
  int bits = 8;
  double scale = 0.0;
  double c = 1.0;
  std::string out_dir = "out";
};

int cmd_lut(const LutArgs& a) {
  const double scale = a.scale > 0.0 ? a.scale : (a.bits == 16 ? 1.0 / 4096.0 : 1.0 / 16.0);
  const consmax::QuantSpec spec{a.bits, scale, true};
  spec.validate();

  std::ostringstream key;
  key << "lut|" << a.bits << "|" << consmax::io::format_double(scale) << "|"
      << consmax::io::format_double(a.c);
  Run run("lut", a.out_dir, "", key.str());

  const std::string dump = a.bits == 8 ? consmax::lut_dump(consmax::build_unit(spec, a.c))
                                       : consmax::lut_dump(consmax::build_reduction_unit(spec, a.c));
  const consmax::LutErrorStats stats = consmax::lut_error_report(spec, a.c);
  run.write("lut_dump.txt", dump);
  json report = consmax::io::to_json(stats);
  report["bits"] = a.bits;
  report["scale"] = scale;
  report["c"] = a.c;
  run.write_json("lut_error.json", report);
  run.finish();
  std::cout << "max_rel_error " << consmax::io::format_double(stats.max_rel_error)
            << "\nmax_ulp_diff_vs_direct " << stats.max_ulp_diff_vs_direct << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

void check_reports(const std::vector<consmax::SimReport>& reports) {
  using consmax::Stage;
  for (const auto& r : reports) {
    const std::uint64_t elements = r.config.num_keys * r.config.num_queries;
    for (Stage s : {Stage::qk, Stage::norm, Stage::pv}) {
      if (r.stage(s).busy_cycles > r.total_cycles) {
        throw CheckFailed(r.config.normalizer.label() + ": busy cycles exceed total on " +
                          consmax::to_string(s));
      }
      if (r.stage(s).elements != elements) {
        throw CheckFailed(r.config.normalizer.label() + ": work not conserved on " +
                          consmax::to_string(s));
      }
    }
    if (r.config.normalizer.kind == consmax::NormalizerKind::consmax && r.sync_cycles != 0) {
      throw CheckFailed("consmax reported sync cycles");
    }
  }
}

int cmd_sim(const std::string& config_path, bool check, const std::string& out_dir) {
  const json doc = parse_json_file(config_path);
  Run run("sim", out_dir, config_path, doc.dump());

  std::vector<consmax::SimReport> reports;
  std::vector<double> speedups;
  json out;
  if (doc.is_object() && doc.contains("configs")) {
    const json& list = doc.at("configs");
    if (!list.is_array() || list.empty()) throw consmax::ConfigError("$.configs", "expected a non-empty array");
    std::vector<consmax::PipelineConfig> cfgs;
    std::vector<std::string> issues;
    for (std::size_t i = 0; i < list.size(); ++i) {
      try {
        cfgs.push_back(consmax::io::pipeline_config_from_json(list[i], "$.configs[" + std::to_string(i) + "]"));
      } catch (const consmax::ConfigError& e) {
        issues.insert(issues.end(), e.issues().begin(), e.issues().end());
      }
    }
    if (!issues.empty()) throw consmax::ConfigError(issues);
    const auto table = consmax::compare(cfgs);
    for (const auto& row : table.rows) {
      reports.push_back(row.report);
      speedups.push_back(row.speedup);
    }
    out["comparison"] = consmax::io::to_json(table);
  } else if (doc.is_object() && doc.contains("lengths")) {
    if (!doc.contains("base")) throw consmax::ConfigError("$.base", "required with lengths");
    const auto base = consmax::io::pipeline_config_from_json(doc.at("base"), "$.base");
    const json& lengths_doc = doc.at("lengths");
    std::vector<std::uint64_t> lengths;
    if (!lengths_doc.is_array()) throw consmax::ConfigError("$.lengths", "expected an array");
    for (std::size_t i = 0; i < lengths_doc.size(); ++i) {
      if (!lengths_doc[i].is_number_unsigned() || lengths_doc[i].get<std::uint64_t>() == 0) {
        throw consmax::ConfigError("$.lengths[" + std::to_string(i) + "]", "expected a positive integer");
      }
      lengths.push_back(lengths_doc[i].get<std::uint64_t>());
    }
    try {
      reports = consmax::sweep_context_length(base, lengths);
    } catch (const consmax::InvalidArgument& e) {
      throw consmax::ConfigError("$.lengths", e.what());
    }
    json curve = json::array();
    for (const auto& r : reports) curve.push_back(consmax::io::to_json(r));
    out["curve"] = curve;
  } else {
    reports.push_back(consmax::simulate(consmax::io::pipeline_config_from_json(doc)));
    out["report"] = consmax::io::to_json(reports.front());
  }

  run.write("sim_report.csv", consmax::io::sim_csv(reports, speedups));
  run.write_json("sim_report.json", out);
  run.finish();
  for (const auto& r : reports) {
    std::cout << r.config.normalizer.label() << " total_cycles=" << r.total_cycles
              << " sync_fraction=" << consmax::io::format_double(r.sync_fraction) << "\n";
  }
  if (check) check_reports(reports);
  return kExitOk;
}

int cmd_calibrate(const std::string& config_path, double target, std::uint64_t max_cost,
                  const std::string& out_dir) {
  const json doc = parse_json_file(config_path);
  const auto base = consmax::io::pipeline_config_from_json(doc);
  if (base.normalizer.kind != consmax::NormalizerKind::partial) {
    throw consmax::ConfigError("$.normalizer", "calibration needs a partial normalizer");
  }
  std::ostringstream key;
  key << doc.dump() << "|" << consmax::io::format_double(target) << "|" << max_cost;
  Run run("calibrate", out_dir, config_path, key.str());
  const auto cal = consmax::calibrate_sync_cost(base, target, max_cost);
  json out;
  out["target"] = target;
  out["sync_cost"] = cal.sync_cost;
  out["sync_fraction"] = cal.sync_fraction;
  run.write_json("calibration.json", out);
  run.finish();
  std::cout << "sync_cost " << cal.sync_cost << "\nsync_fraction "
            << consmax::io::format_double(cal.sync_fraction) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

consmax::TrainConfig load_train_config(const std::string& path, const std::string& seed_flag,
                                       std::string& key) {
  json doc = path.empty() ? json::object() : parse_json_file(path);
  if (!seed_flag.empty()) {
    if (!doc.is_object()) throw consmax::ConfigError("$", "expected an object");
    doc["seed"] = std::stoull(seed_flag);
  }
  key = doc.dump();
  return consmax::io::train_config_from_json(doc);
}

int cmd_sweep(const std::string& config_path, const std::string& seed, const std::string& out_dir) {
  std::string key;
  const auto cfg = load_train_config(config_path, seed, key);
  Run run("sweep", out_dir, config_path, key);
  const auto result = consmax::sweep_init(cfg);
  run.write("sweep.csv", consmax::io::sweep_csv(result));
  json best;
  best["beta"] = result.best.beta;
  best["gamma"] = result.best.gamma;
  best["validation_loss"] = result.best.validation_loss;
  best["combinations"] = result.table.size();
  run.write_json("sweep_best.json", best);
  run.finish();
  std::cout << "chosen beta=" << consmax::io::format_double(result.best.beta)
            << " gamma=" << consmax::io::format_double(result.best.gamma)
            << " validation_loss=" << consmax::io::format_double(result.best.validation_loss) << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& seed, bool check,
              const std::string& out_dir) {
  std::string key;
  const auto cfg = load_train_config(config_path, seed, key);
  Run run("train", out_dir, config_path, key);
  const auto result = consmax::train_toy(cfg);

  run.write("train_softmax.csv", consmax::io::trace_csv(result.softmax));
  json runs = json::array();
  for (std::size_t i = 0; i < result.consmax.size(); ++i) {
    const auto& t = result.consmax[i];
    run.write("train_consmax_" + std::to_string(i) + ".csv", consmax::io::trace_csv(t));
    runs.push_back({{"beta_init", t.beta_init},
                    {"gamma_init", t.gamma_init},
                    {"final_loss", t.final_loss},
                    {"final_beta", t.final_beta},
                    {"final_gamma", t.final_gamma},
                    {"validation_loss", t.validation_loss},
                    {"gamma_drift", consmax::gamma_drift(t)},
                    {"loss_ratio_vs_softmax", t.final_loss / result.softmax.final_loss}});
  }
  const double spread0 = consmax::beta_spread(result.consmax, 0);
  const double spread_final = consmax::beta_spread(result.consmax, cfg.iterations);
  json summary;
  summary["config"] = consmax::io::to_json(cfg);
  summary["softmax"] = {{"final_loss", result.softmax.final_loss},
                        {"validation_loss", result.softmax.validation_loss}};
  summary["consmax"] = runs;
  summary["beta_spread_initial"] = spread0;
  summary["beta_spread_final"] = spread_final;
  run.write_json("train_summary.json", summary);
  run.finish();

  std::cout << "softmax final_loss " << consmax::io::format_double(result.softmax.final_loss) << "\n";
  for (const auto& t : result.consmax) {
    std::cout << "consmax beta_init=" << consmax::io::format_double(t.beta_init)
              << " final_loss " << consmax::io::format_double(t.final_loss) << "\n";
  }
  if (check) {
    for (const auto& t : result.consmax) {
      if (t.final_loss > 1.05 * result.softmax.final_loss) {
        throw CheckFailed("consmax loss exceeds 1.05x softmax for beta_init " +
                          consmax::io::format_double(t.beta_init));
      }
      if (consmax::gamma_drift(t) > 0.2) throw CheckFailed("gamma drift above 20%");
    }
    if (result.consmax.size() > 1 && !(spread_final < spread0)) {
      throw CheckFailed("beta spread did not shrink");
    }
  }
  return kExitOk;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, bool seed_flag, std::size_t instances,
                  bool instances_flag, bool check, const std::string& out_dir) {
  // Optional config: {"seed": int, "instances": int}; flags given on the command line win.
  if (!config_path.empty()) {
    const json doc = parse_json_file(config_path);
    if (!doc.is_object()) throw consmax::ConfigError("$", "expected an object");
    std::vector<std::string> issues;
    for (const auto& [k, v] : doc.items()) {
      if (k != "seed" && k != "instances") issues.push_back("$." + k + ": unknown field");
      else if (!v.is_number_unsigned()) issues.push_back("$." + k + ": expected a non-negative integer");
    }
    if (!issues.empty()) throw consmax::ConfigError(issues);
    if (doc.contains("seed") && !seed_flag) seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("instances") && !instances_flag) instances = doc["instances"].get<std::size_t>();
  }
  if (instances == 0) throw consmax::ConfigError("$.instances", "must be >= 1");
  std::ostringstream key;
  key << "gradcheck|" << seed << "|" << instances;
  Run run("gradcheck", out_dir, config_path, key.str());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(1, 16);
  std::uniform_real_distribution<double> score(-3.0, 3.0), beta(-2.0, 2.0), gamma(0.5, 150.0);
  std::normal_distribution<double> up(0.0, 1.0);
  constexpr double kEps = 1e-6;

  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = len(rng);
    std::vector<double> s(n), u(n);
    for (auto& v : s) v = score(rng);
    for (auto& v : u) v = up(rng);
    const double b = beta(rng);
    const double g = gamma(rng);

    const auto analytic = consmax::consmax_backward(consmax::ScoreVector(s), {b, g, std::nullopt}, u);
    // Linear probe loss L = sum_i u_i y_i over (s..., beta, gamma).
    std::vector<double> x = s;
    x.push_back(b);
    x.push_back(g);
    const auto numeric = consmax::finite_diff_grad(
        [&](std::span<const double> p) {
          const auto y = consmax::consmax_train(
              consmax::ScoreVector(std::vector<double>(p.begin(), p.begin() + n)),
              {p[n], p[n + 1], std::nullopt});
          double l = 0.0;
          for (std::size_t i = 0; i < n; ++i) l += u[i] * y.values[i];
          return l;
        },
        x, kEps);

    double diff = 0.0, na = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diff += std::pow(analytic.d_scores[i] - numeric[i], 2);
      na += std::pow(analytic.d_scores[i], 2);
      nf += std::pow(numeric[i], 2);
    }
    auto rel = [](double a, double f, double d) {
      const double denom = std::max(a, f);
      return denom == 0.0 ? 0.0 : d / denom;
    };
    worst = std::max(worst, rel(std::sqrt(na), std::sqrt(nf), std::sqrt(diff)));
    worst = std::max(worst, rel(std::fabs(analytic.d_beta), std::fabs(numeric[n]),
                                std::fabs(analytic.d_beta - numeric[n])));
    worst = std::max(worst, rel(std::fabs(analytic.d_gamma), std::fabs(numeric[n + 1]),
                                std::fabs(analytic.d_gamma - numeric[n + 1])));
  }

  json out;
  out["seed"] = seed;
  out["instances"] = instances;
  out["eps"] = kEps;
  out["max_rel_error"] = worst;
  out["threshold"] = 1e-5;
  out["pass"] = worst <= 1e-5;
  run.write_json("gradcheck.json", out);
  run.finish();
  std::cout << "max_rel_error " << consmax::io::format_double(worst) << "\n";
  if (check && worst > 1e-5) throw CheckFailed("gradient check above 1e-5");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ConSmax normalizer, LUT hardware model and attention pipeline simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  NormalizeArgs norm;
  auto* normalize = app.add_subcommand("normalize", "Normalize score rows from a CSV or JSON file");
  normalize->add_option("--input", norm.input, "Score file (.csv or .json)")->required();
  normalize->add_option("--mode", norm.mode, "softmax | consmax | consmax-infer | partial")
      ->check(CLI::IsMember({"softmax", "consmax", "consmax-infer", "partial"}));
  normalize->add_option("--beta", norm.beta, "ConSmax shift");
  normalize->add_option("--gamma", norm.gamma, "ConSmax denominator");
  normalize->add_option("--c", norm.c, "Merged inference constant (default exp(-beta)/gamma)");
  normalize->add_option("--block-size", norm.block_size, "Partial Softmax block (default N)");
  normalize->add_option("--out-dir", norm.out_dir);

  LutArgs lut;
  auto* lut_cmd = app.add_subcommand("lut", "Dump LUT contents and exhaustive error statistics");
  lut_cmd->add_option("--bits", lut.bits, "Input bitwidth")->check(CLI::IsMember({8, 16}));
  lut_cmd->add_option("--scale", lut.scale, "Real value per input LSB (default 1/16, or 1/4096 for 16-bit)");
  lut_cmd->add_option("--c", lut.c, "Merged constant C");
  lut_cmd->add_option("--out-dir", lut.out_dir);

  std::string config_path, out_dir = "out", seed_flag;
  bool check = false;
  auto* sim = app.add_subcommand("sim", "Simulate a pipeline config, a comparison or a context sweep");
  sim->add_option("--config", config_path)->required();
  sim->add_flag("--check", check, "Exit 3 when a report invariant fails");
  sim->add_option("--out-dir", out_dir);

  double target = 0.188;
  std::uint64_t max_cost = 4096;
  auto* calibrate = app.add_subcommand("calibrate", "Find the sync_cost hitting a target sync fraction");
  calibrate->add_option("--config", config_path)->required();
  calibrate->add_option("--target", target);
  calibrate->add_option("--max-cost", max_cost);
  calibrate->add_option("--out-dir", out_dir);

  auto* sweep = app.add_subcommand("sweep", "Warm-up sweep over initial beta/gamma");
  sweep->add_option("--config", config_path);
  sweep->add_option("--seed", seed_flag);
  sweep->add_option("--out-dir", out_dir);

  auto* train = app.add_subcommand("train", "Train Softmax and ConSmax heads on the retrieval task");
  train->add_option("--config", config_path);
  train->add_option("--seed", seed_flag);
  train->add_flag("--check", check, "Exit 3 when the loss/beta/gamma checks fail");
  train->add_option("--out-dir", out_dir);

  std::uint64_t grad_seed = 0;
  std::size_t instances = 1000;
  auto* gradcheck = app.add_subcommand("gradcheck", "Analytic vs central-difference ConSmax gradients");
  gradcheck->add_option("--config", config_path);
  auto* grad_seed_opt = gradcheck->add_option("--seed", grad_seed);
  auto* instances_opt = gradcheck->add_option("--instances", instances);
  gradcheck->add_flag("--check", check, "Exit 3 when the error exceeds 1e-5");
  gradcheck->add_option("--out-dir", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*normalize) return cmd_normalize(norm);
    if (*lut_cmd) return cmd_lut(lut);
    if (*sim) return cmd_sim(config_path, check, out_dir);
    if (*calibrate) return cmd_calibrate(config_path, target, max_cost, out_dir);
    if (*sweep) return cmd_sweep(config_path, seed_flag, out_dir);
    if (*train) return cmd_train(config_path, seed_flag, check, out_dir);
    if (*gradcheck) return cmd_gradcheck(config_path, grad_seed, grad_seed_opt->count() > 0, instances,
                                         instances_opt->count() > 0, check, out_dir);
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheck;
  } catch (const consmax::ConfigError& e) {
    for (const auto& issue : e.issues()) std::cerr << "config error: " << issue << "\n";
    return kExitConfig;
  } catch (const consmax::BuildError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
