#pragma once

// Double-precision reference normalizers: Softmax, block-synchronized
// (partial/online) Softmax, and ConSmax in training and merged-inference form.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace consmax {

/// Attention scores of one query row. Non-empty, every element finite.
class ScoreVector {
 public:
  explicit ScoreVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

/// Normalizer output. `normalized` is set only when the elements are
/// guaranteed to sum to one (Softmax family); ConSmax never sets it.
struct NormVector {
  std::vector<double> values;
  bool normalized = false;

  double sum() const noexcept;
};

/// Per-head learnable shift `beta` and denominator `gamma`, plus the
/// inference constant `merged_c = exp(-beta) / gamma` once merged.
struct ConsmaxParams {
  double beta = 0.0;
  double gamma = 1.0;
  std::optional<double> merged_c;

  /// Validates gamma > 0 and fills merged_c.
  static ConsmaxParams make(double beta, double gamma);
};

struct PartialSoftmaxTrace {
  std::size_t block_size = 0;
  std::size_t num_blocks = 0;
  std::vector<double> local_maxima;
  std::vector<double> local_sums;
  std::size_t sync_ops = 0;
};

enum class MergeMode {
  consistent,     // exp(-beta) / gamma
  negative_literal,  // -exp(beta) / gamma; rejected
};

NormVector softmax(const ScoreVector& scores);

/// exp(s_i - beta) / gamma, element-wise. Throws InvalidParameter if gamma <= 0.
NormVector consmax_train(const ScoreVector& scores, const ConsmaxParams& params);

/// Folds beta and gamma into one multiplier C with C * exp(s) == exp(s - beta) / gamma.
/// MergeMode::negative_literal always throws: that form is negative and does not
/// satisfy the identity.
double merge_constants(double beta, double gamma, MergeMode mode = MergeMode::consistent);

/// merged_c * exp(s_i). Throws InvalidParameter if merged_c <= 0.
NormVector consmax_infer(const ScoreVector& scores, double merged_c);

/// Block-local Softmax followed by cross-block max alignment and sum
/// normalization. block_size >= 1; a block larger than N is one block.
std::pair<NormVector, PartialSoftmaxTrace> partial_softmax(const ScoreVector& scores,
                                                           std::size_t block_size);

/// Number of cross-block synchronization operations for a row of `n` scores
/// split into blocks of `block_size`: one max-alignment and one sum-normalization
/// pass per block.
std::size_t partial_softmax_sync_ops(std::size_t n, std::size_t block_size);

}  // namespace consmax
