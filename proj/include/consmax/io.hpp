#pragma once

// JSON config schemas, CSV/JSON report writers and score-file parsing shared
// by the command-line tool and the tests.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "consmax/lut_unit.hpp"
#include "consmax/pipeline_sim.hpp"
#include "consmax/train.hpp"

namespace consmax::io {

using json = nlohmann::ordered_json;

/// Locale-independent "%.17g".
std::string format_double(double v);

/// FNV-1a 64-bit digest as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Pipeline configs. Missing fields take the PipelineConfig defaults; unknown
// fields and type errors are reported with their JSON path.
PipelineConfig pipeline_config_from_json(const json& doc, const std::string& path = "$");
json to_json(const PipelineConfig& cfg);
json to_json(const SimReport& report);
json to_json(const ComparisonTable& table);

/// Header plus one row per report; `speedups` may be empty.
std::string sim_csv(std::span<const SimReport> reports, std::span<const double> speedups = {});

// Training configs. "gamma_init" (scalar) is accepted as a one-element grid.
TrainConfig train_config_from_json(const json& doc);
json to_json(const TrainConfig& cfg);

/// iteration,loss,beta,gamma
std::string trace_csv(const TrainTrace& trace);
std::string sweep_csv(const SweepResult& sweep);

json to_json(const LutErrorStats& stats);

/// Score rows from CSV (one comma-separated row per line, blank lines and
/// '#' comments skipped) or JSON (array of arrays). Errors carry "line N:".
std::vector<std::vector<double>> parse_score_csv(std::string_view text);
std::vector<std::vector<double>> parse_score_json(std::string_view text);

}  // namespace consmax::io
