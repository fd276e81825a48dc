#pragma once

// Cycle-approximate model of the Q*K -> normalize -> P*V attention pipeline.
//
// Each stage is a single unit-rate server that handles one score element per
// `lat_*` cycles and serves its operations in program order. An operation
// starts once its inputs are released and the unit is free. The normalizer
// discipline decides when normalized elements are released to P*V:
//
//   softmax   max pass as scores arrive, global max sync, exp/sum pass over
//             the whole row, global sum sync; the row is released at once.
//   partial   one online exp/sum pass per element (running block max); when a
//             block's pass is done, max-alignment and sum-normalization syncs
//             merge it into the running global state and release the block.
//   consmax   one exp*C op per element; released as soon as it is done.
//
// Sync ops run on the normalizer unit and cost `sync_cost` cycles each.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace consmax {

enum class Stage : std::size_t { qk = 0, norm = 1, pv = 2 };
inline constexpr std::size_t kNumStages = 3;

const char* to_string(Stage stage) noexcept;

enum class NormalizerKind { softmax, partial, consmax };

struct Normalizer {
  NormalizerKind kind = NormalizerKind::consmax;
  std::size_t block_size = 0;  // partial only

  static Normalizer softmax() { return {NormalizerKind::softmax, 0}; }
  static Normalizer partial(std::size_t block) { return {NormalizerKind::partial, block}; }
  static Normalizer consmax() { return {NormalizerKind::consmax, 0}; }

  /// "softmax", "partial(128)", "consmax".
  std::string label() const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

enum class PipelineMode { generation, summarization };

const char* to_string(PipelineMode mode) noexcept;

struct PipelineConfig {
  std::uint64_t num_keys = 1024;   // N, context length
  std::uint64_t num_queries = 1;   // M
  std::uint64_t tile_size = 16;    // scores released per Q*K step
  std::uint64_t lat_qk = 1;
  std::uint64_t lat_norm = 1;
  std::uint64_t lat_pv = 1;
  std::uint64_t sync_cost = 32;    // cycles per synchronization op
  Normalizer normalizer = Normalizer::consmax();
  PipelineMode mode = PipelineMode::generation;

  /// Throws ConfigError listing every offending field.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct StageStats {
  std::uint64_t elements = 0;
  std::uint64_t busy_cycles = 0;

  friend bool operator==(const StageStats&, const StageStats&) = default;
};

struct SimReport {
  PipelineConfig config;
  std::uint64_t total_cycles = 0;
  std::array<StageStats, kNumStages> stages{};
  std::uint64_t first_pv_start = 0;
  std::uint64_t sync_ops = 0;
  std::uint64_t sync_cycles = 0;
  double sync_fraction = 0.0;

  const StageStats& stage(Stage s) const { return stages[static_cast<std::size_t>(s)]; }
  double utilization(Stage s) const;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// Normalizer passes over every score element (2 for softmax, 1 otherwise).
std::uint64_t norm_passes(const Normalizer& normalizer) noexcept;

/// Sync ops per query row: 2 per block for partial, 2 for softmax, 0 for consmax.
std::uint64_t sync_ops_per_row(const Normalizer& normalizer, std::uint64_t num_keys) noexcept;

SimReport simulate(const PipelineConfig& cfg);

struct ComparisonRow {
  SimReport report;
  double speedup = 1.0;  // total_cycles(first) / total_cycles(this)
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

/// Simulates each config; all must share num_keys and num_queries.
ComparisonTable compare(std::span<const PipelineConfig> cfgs);

/// One report per context length; lengths must be non-empty and strictly increasing.
std::vector<SimReport> sweep_context_length(const PipelineConfig& base,
                                            std::span<const std::uint64_t> lengths);

struct SyncCalibration {
  std::uint64_t sync_cost = 0;
  double sync_fraction = 0.0;
};

/// Integer sync_cost in [0, max_cost] whose sync_fraction on `base` is closest
/// to `target` (ties go to the smaller cost). A calibration aid, not a prediction.
SyncCalibration calibrate_sync_cost(const PipelineConfig& base, double target,
                                    std::uint64_t max_cost = 4096);

}  // namespace consmax
