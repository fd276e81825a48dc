#include "consmax/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "consmax/errors.hpp"

namespace consmax {

ScoreVector::ScoreVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("score vector must not be empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InvalidArgument("score vector element " + std::to_string(i) + " is not finite");
    }
  }
}

double NormVector::sum() const noexcept {
  return std::accumulate(values.begin(), values.end(), 0.0);
}

ConsmaxParams ConsmaxParams::make(double beta, double gamma) {
  ConsmaxParams p;
  p.beta = beta;
  p.gamma = gamma;
  p.merged_c = merge_constants(beta, gamma);
  return p;
}

namespace {

void require_positive_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidParameter("gamma must be finite and > 0, got " + std::to_string(gamma));
  }
}

}  // namespace

NormVector softmax(const ScoreVector& scores) {
  const auto s = scores.values();
  const double max_score = *std::max_element(s.begin(), s.end());

  NormVector out;
  out.values.resize(s.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.values[i] = std::exp(s[i] - max_score);
    denom += out.values[i];
  }
  for (double& v : out.values) v /= denom;
  out.normalized = true;
  return out;
}

NormVector consmax_train(const ScoreVector& scores, const ConsmaxParams& params) {
  require_positive_gamma(params.gamma);
  NormVector out;
  out.values.reserve(scores.size());
  for (double s : scores.values()) out.values.push_back(std::exp(s - params.beta) / params.gamma);
  return out;
}

double merge_constants(double beta, double gamma, MergeMode mode) {
  require_positive_gamma(gamma);
  if (mode == MergeMode::negative_literal) {
    throw InvalidParameter(
        "literal merged constant -exp(beta)/gamma is negative and does not satisfy "
        "C*exp(s) == exp(s-beta)/gamma; use MergeMode::consistent");
  }
  return std::exp(-beta) / gamma;
}

NormVector consmax_infer(const ScoreVector& scores, double merged_c) {
  if (!(merged_c > 0.0) || !std::isfinite(merged_c)) {
    throw InvalidParameter("merged constant C must be finite and > 0, got " +
                           std::to_string(merged_c));
  }
  NormVector out;
  out.values.reserve(scores.size());
  for (double s : scores.values()) out.values.push_back(merged_c * std::exp(s));
  return out;
}

std::size_t partial_softmax_sync_ops(std::size_t n, std::size_t block_size) {
  return 2 * ((n + block_size - 1) / block_size);
}

std::pair<NormVector, PartialSoftmaxTrace> partial_softmax(const ScoreVector& scores,
                                                           std::size_t block_size) {
  const auto s = scores.values();
  const std::size_t n = s.size();
  if (block_size < 1) {
    throw InvalidArgument("block_size must be >= 1, got " + std::to_string(block_size));
  }

  PartialSoftmaxTrace trace;
  trace.block_size = block_size;
  trace.num_blocks = (n + block_size - 1) / block_size;
  trace.local_maxima.reserve(trace.num_blocks);
  trace.local_sums.reserve(trace.num_blocks);

  // Block-local Softmax numerators, each block shifted by its own maximum.
  std::vector<double> local(n);
  for (std::size_t b = 0; b < trace.num_blocks; ++b) {
    const std::size_t lo = b * block_size;
    const std::size_t hi = std::min(lo + block_size, n);
    const double m = *std::max_element(s.begin() + lo, s.begin() + hi);
    double l = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      local[i] = std::exp(s[i] - m);
      l += local[i];
    }
    trace.local_maxima.push_back(m);
    trace.local_sums.push_back(l);
  }

  // Synchronization: align every block to the global maximum, then normalize
  // by the rescaled global sum.
  const double global_max =
      *std::max_element(trace.local_maxima.begin(), trace.local_maxima.end());
  std::vector<double> align(trace.num_blocks);
  double global_sum = 0.0;
  for (std::size_t b = 0; b < trace.num_blocks; ++b) {
    align[b] = std::exp(trace.local_maxima[b] - global_max);
    global_sum += trace.local_sums[b] * align[b];
  }
  trace.sync_ops = partial_softmax_sync_ops(n, block_size);

  NormVector out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = local[i] * align[i / block_size] / global_sum;
  }
  out.normalized = true;
  return {std::move(out), std::move(trace)};
}

}  // namespace consmax
