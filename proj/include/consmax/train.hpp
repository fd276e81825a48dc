#pragma once

// Gradients of the ConSmax normalizer, a central-difference oracle, and a
// toy single-head attention trainer used to study beta/gamma dynamics.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "consmax/softmax.hpp"

namespace consmax {

struct ConsmaxGrad {
  std::vector<double> d_scores;
  double d_beta = 0.0;
  double d_gamma = 0.0;
};

/// Backward pass of y_i = exp(s_i - beta) / gamma for upstream dL/dy.
ConsmaxGrad consmax_backward(const ScoreVector& scores, const ConsmaxParams& params,
                             std::span<const double> upstream);

/// Backward pass of Softmax given its output probabilities.
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> upstream);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Throws InvalidArgument for eps <= 0 and std::domain_error when f is not finite.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps);

// ---------------------------------------------------------------------------
// Synthetic key/value retrieval task

struct RetrievalTask {
  std::size_t seq_len = 8;        // key/value pairs per sample
  std::size_t dim = 16;           // embedding width (<= 64)
  std::size_t train_samples = 64;
  std::size_t val_samples = 64;
  double label_noise = 0.2;       // stddev of Gaussian noise on targets
};

struct RetrievalSample {
  std::vector<double> query;   // dim
  std::vector<double> keys;    // seq_len x dim, unit-norm rows
  std::vector<double> values;  // seq_len x dim
  std::vector<double> target;  // value of the best-matching key, plus noise
};

struct RetrievalDataset {
  std::size_t seq_len = 0;
  std::size_t dim = 0;
  std::vector<RetrievalSample> samples;

  static RetrievalDataset generate(const RetrievalTask& task, std::size_t count,
                                   std::mt19937_64& rng);
};

enum class HeadNormalizer { softmax, consmax };

const char* to_string(HeadNormalizer n) noexcept;

struct HeadGrad {
  std::vector<double> w_q, w_k, w_v;
  double d_beta = 0.0;
  double d_gamma = 0.0;
};

/// One attention head: scores s_j = (W_q q) . (W_k k_j) / sqrt(d), weights
/// from the normalizer, output W_v sum_j p_j v_j. Matrices are row-major d x d.
struct AttentionHead {
  std::size_t dim = 0;
  std::vector<double> w_q, w_k, w_v;
  HeadNormalizer normalizer = HeadNormalizer::softmax;
  ConsmaxParams consmax;

  /// Identity plus N(0, 0.1^2) perturbation.
  static AttentionHead init(std::size_t dim, HeadNormalizer normalizer, double beta,
                            double gamma, std::mt19937_64& rng);

  /// Mean over samples of ||out - target||^2 / d.
  double loss(const RetrievalDataset& data) const;
  double loss_and_grad(const RetrievalDataset& data, HeadGrad& grad) const;

  /// Scores for one sample, before normalization.
  std::vector<double> scores(const RetrievalSample& sample) const;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t iterations = 5000;
  double learning_rate = 0.5;
  std::vector<double> beta_init_grid{0.5, 1.5, 2.5};
  std::vector<double> gamma_init_grid{100.0};
  RetrievalTask task;
  std::size_t warmup_iters = 500;

  /// Throws ConfigError listing every offending field.
  void validate() const;
};

struct TrainTrace {
  HeadNormalizer normalizer = HeadNormalizer::softmax;
  double beta_init = 0.0;
  double gamma_init = 1.0;
  // Values at the start of each iteration, before its update.
  std::vector<double> loss_curve;
  std::vector<double> beta_curve;
  std::vector<double> gamma_curve;
  // After the last update.
  double final_loss = 0.0;
  double final_beta = 0.0;
  double final_gamma = 1.0;
  double validation_loss = 0.0;
  AttentionHead head;
};

struct ToyTrainResult {
  TrainTrace softmax;
  std::vector<TrainTrace> consmax;  // one per beta_init_grid entry, gamma = gamma_init_grid[0]
};

/// Plain gradient descent on one head; throws DivergenceError on a non-finite loss.
TrainTrace train_head(const RetrievalDataset& train, const RetrievalDataset& validation,
                      HeadNormalizer normalizer, double beta_init, double gamma_init,
                      std::size_t iterations, double learning_rate, std::uint64_t init_seed);

/// Trains the Softmax baseline and one ConSmax head per beta init on the same data
/// and the same initial weights.
ToyTrainResult train_toy(const TrainConfig& cfg);

struct SweepEntry {
  double beta = 0.0;
  double gamma = 0.0;
  double validation_loss = 0.0;
};

struct SweepResult {
  SweepEntry best;
  std::vector<SweepEntry> table;  // beta-major, gamma-minor
};

/// Warm-up training for every (beta, gamma) pair; best is the lowest
/// validation loss, ties broken by smaller beta then smaller gamma.
SweepResult sweep_init(const TrainConfig& cfg);

/// max - min of beta across traces, at `iteration` (or final values when
/// iteration == curve length).
double beta_spread(std::span<const TrainTrace> traces, std::size_t iteration);

/// max_t |gamma_t - gamma_0| / gamma_0, including the final value.
double gamma_drift(const TrainTrace& trace);

}  // namespace consmax
