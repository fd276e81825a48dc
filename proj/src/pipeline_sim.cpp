#include "consmax/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>

#include "consmax/errors.hpp"

namespace consmax {

const char* to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::qk: return "qk";
    case Stage::norm: return "norm";
    case Stage::pv: return "pv";
  }
  return "?";
}

const char* to_string(PipelineMode mode) noexcept {
  return mode == PipelineMode::generation ? "generation" : "summarization";
}

std::string Normalizer::label() const {
  switch (kind) {
    case NormalizerKind::softmax: return "softmax";
    case NormalizerKind::partial: return "partial(" + std::to_string(block_size) + ")";
    case NormalizerKind::consmax: return "consmax";
  }
  return "?";
}

void PipelineConfig::validate() const {
  std::vector<std::string> issues;
  auto at_least = [&](const char* field, std::uint64_t value, std::uint64_t lo) {
    if (value < lo) {
      issues.push_back(std::string("$.") + field + ": must be >= " + std::to_string(lo) +
                       ", got " + std::to_string(value));
    }
  };
  at_least("num_keys", num_keys, 1);
  at_least("num_queries", num_queries, 1);
  at_least("tile_size", tile_size, 1);
  at_least("lat_qk", lat_qk, 1);
  at_least("lat_norm", lat_norm, 1);
  at_least("lat_pv", lat_pv, 1);
  if (normalizer.kind == NormalizerKind::partial) at_least("block_size", normalizer.block_size, 1);
  if (mode == PipelineMode::generation && num_queries != 1) {
    issues.push_back("$.num_queries: generation mode processes exactly one query, got " +
                     std::to_string(num_queries));
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

double SimReport::utilization(Stage s) const {
  return total_cycles == 0 ? 0.0
                           : static_cast<double>(stage(s).busy_cycles) /
                                 static_cast<double>(total_cycles);
}

std::uint64_t norm_passes(const Normalizer& normalizer) noexcept {
  return normalizer.kind == NormalizerKind::softmax ? 2 : 1;
}

std::uint64_t sync_ops_per_row(const Normalizer& normalizer, std::uint64_t num_keys) noexcept {
  switch (normalizer.kind) {
    case NormalizerKind::softmax: return 2;
    case NormalizerKind::partial:
      return 2 * ((num_keys + normalizer.block_size - 1) / normalizer.block_size);
    case NormalizerKind::consmax: return 0;
  }
  return 0;
}

SimReport simulate(const PipelineConfig& cfg) {
  cfg.validate();
  const std::uint64_t n = cfg.num_keys;

  SimReport report;
  report.config = cfg;

  // Cycle at which each unit becomes free.
  std::uint64_t qk_free = 0;
  std::uint64_t norm_free = 0;
  std::uint64_t pv_free = 0;
  bool pv_started = false;

  std::vector<std::uint64_t> score_ready(n);
  std::vector<std::uint64_t> released(n);

  auto norm_op = [&](std::uint64_t i) {
    norm_free = std::max(norm_free, score_ready[i]) + cfg.lat_norm;
  };

  for (std::uint64_t row = 0; row < cfg.num_queries; ++row) {
    // Q*K emits a tile of scores at once when its last element is done.
    for (std::uint64_t lo = 0; lo < n; lo += cfg.tile_size) {
      const std::uint64_t hi = std::min(lo + cfg.tile_size, n);
      qk_free += (hi - lo) * cfg.lat_qk;
      std::fill(score_ready.begin() + lo, score_ready.begin() + hi, qk_free);
    }

    switch (cfg.normalizer.kind) {
      case NormalizerKind::consmax:
        for (std::uint64_t i = 0; i < n; ++i) {
          norm_op(i);
          released[i] = norm_free;
        }
        break;

      case NormalizerKind::softmax:
        for (std::uint64_t i = 0; i < n; ++i) norm_op(i);  // running max
        norm_free += cfg.sync_cost;                         // global max
        norm_free += n * cfg.lat_norm;                      // exp and sum
        norm_free += cfg.sync_cost;                         // global sum
        std::fill(released.begin(), released.end(), norm_free);
        break;

      case NormalizerKind::partial: {
        const std::uint64_t block = cfg.normalizer.block_size;
        for (std::uint64_t lo = 0; lo < n; lo += block) {
          const std::uint64_t hi = std::min(lo + block, n);
          for (std::uint64_t i = lo; i < hi; ++i) norm_op(i);
          norm_free += 2 * cfg.sync_cost;  // max alignment, sum normalization
          std::fill(released.begin() + lo, released.begin() + hi, norm_free);
        }
        break;
      }
    }

    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint64_t start = std::max(pv_free, released[i]);
      if (!pv_started) {
        report.first_pv_start = start;
        pv_started = true;
      }
      pv_free = start + cfg.lat_pv;
    }
  }

  const std::uint64_t elements = n * cfg.num_queries;
  report.total_cycles = pv_free;
  report.stages[static_cast<std::size_t>(Stage::qk)] = {elements, elements * cfg.lat_qk};
  report.stages[static_cast<std::size_t>(Stage::norm)] = {
      elements, elements * cfg.lat_norm * norm_passes(cfg.normalizer)};
  report.stages[static_cast<std::size_t>(Stage::pv)] = {elements, elements * cfg.lat_pv};
  report.sync_ops = sync_ops_per_row(cfg.normalizer, n) * cfg.num_queries;
  report.sync_cycles = report.sync_ops * cfg.sync_cost;
  report.sync_fraction =
      static_cast<double>(report.sync_cycles) / static_cast<double>(report.total_cycles);
  return report;
}

ComparisonTable compare(std::span<const PipelineConfig> cfgs) {
  if (cfgs.empty()) throw InvalidArgument("compare needs at least one config");
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    if (cfgs[i].num_keys != cfgs[0].num_keys || cfgs[i].num_queries != cfgs[0].num_queries) {
      throw ConfigError("$[" + std::to_string(i) + "]",
                        "workload differs from $[0] (num_keys/num_queries must match)");
    }
  }
  ComparisonTable table;
  for (const auto& cfg : cfgs) table.rows.push_back({simulate(cfg), 1.0});
  const auto base = static_cast<double>(table.rows.front().report.total_cycles);
  for (auto& row : table.rows) row.speedup = base / static_cast<double>(row.report.total_cycles);
  return table;
}

std::vector<SimReport> sweep_context_length(const PipelineConfig& base,
                                            std::span<const std::uint64_t> lengths) {
  if (lengths.empty()) throw InvalidArgument("sweep needs at least one context length");
  for (std::size_t i = 1; i < lengths.size(); ++i) {
    if (lengths[i] <= lengths[i - 1]) {
      throw InvalidArgument("context lengths must be strictly increasing");
    }
  }
  std::vector<SimReport> curve;
  curve.reserve(lengths.size());
  for (std::uint64_t n : lengths) {
    PipelineConfig cfg = base;
    cfg.num_keys = n;
    curve.push_back(simulate(cfg));
  }
  return curve;
}

SyncCalibration calibrate_sync_cost(const PipelineConfig& base, double target,
                                    std::uint64_t max_cost) {
  SyncCalibration best;
  double best_gap = INFINITY;
  PipelineConfig cfg = base;
  for (std::uint64_t cost = 0; cost <= max_cost; ++cost) {
    cfg.sync_cost = cost;
    const double fraction = simulate(cfg).sync_fraction;
    const double gap = std::fabs(fraction - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = {cost, fraction};
    }
  }
  return best;
}

}  // namespace consmax
