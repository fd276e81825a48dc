#include "consmax/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "consmax/errors.hpp"

namespace consmax {

ConsmaxGrad consmax_backward(const ScoreVector& scores, const ConsmaxParams& params,
                             std::span<const double> upstream) {
  if (upstream.size() != scores.size()) {
    throw InvalidArgument("upstream gradient length " + std::to_string(upstream.size()) +
                          " != score length " + std::to_string(scores.size()));
  }
  const NormVector y = consmax_train(scores, params);
  ConsmaxGrad g;
  g.d_scores.resize(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    g.d_scores[i] = upstream[i] * y.values[i];
    total += g.d_scores[i];
  }
  // dy/dbeta = -y, dy/dgamma = -y / gamma.
  g.d_beta = -total;
  g.d_gamma = -total / params.gamma;
  return g;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> upstream) {
  if (probs.size() != upstream.size()) throw InvalidArgument("softmax_backward: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * upstream[i];
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (upstream[i] - dot);
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("finite difference step must be > 0");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double plus = f(point);
    point[i] = saved - eps;
    const double minus = f(point);
    point[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw std::domain_error("non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

// ---------------------------------------------------------------------------

RetrievalDataset RetrievalDataset::generate(const RetrievalTask& task, std::size_t count,
                                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, task.seq_len - 1);
  const std::size_t d = task.dim;
  const std::size_t len = task.seq_len;

  RetrievalDataset data;
  data.seq_len = len;
  data.dim = d;
  data.samples.resize(count);
  for (auto& s : data.samples) {
    s.keys.resize(len * d);
    s.values.resize(len * d);
    for (std::size_t j = 0; j < len; ++j) {
      double norm = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        s.keys[j * d + a] = normal(rng);
        norm += s.keys[j * d + a] * s.keys[j * d + a];
      }
      norm = std::sqrt(norm);
      for (std::size_t a = 0; a < d; ++a) s.keys[j * d + a] /= norm;
      for (std::size_t a = 0; a < d; ++a) s.values[j * d + a] = normal(rng);
    }
    const std::size_t asked = pick(rng);
    s.query.assign(s.keys.begin() + asked * d, s.keys.begin() + (asked + 1) * d);

    std::size_t best = 0;
    double best_dot = -INFINITY;
    for (std::size_t j = 0; j < len; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < d; ++a) dot += s.query[a] * s.keys[j * d + a];
      if (dot > best_dot) {
        best_dot = dot;
        best = j;
      }
    }
    s.target.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      s.target[a] = s.values[best * d + a] + task.label_noise * normal(rng);
    }
  }
  return data;
}

const char* to_string(HeadNormalizer n) noexcept {
  return n == HeadNormalizer::softmax ? "softmax" : "consmax";
}

AttentionHead AttentionHead::init(std::size_t dim, HeadNormalizer normalizer, double beta,
                                  double gamma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.1);
  AttentionHead head;
  head.dim = dim;
  head.normalizer = normalizer;
  head.consmax = ConsmaxParams{beta, gamma, std::nullopt};
  for (auto* w : {&head.w_q, &head.w_k, &head.w_v}) {
    w->resize(dim * dim);
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t c = 0; c < dim; ++c) w->at(r * dim + c) = (r == c ? 1.0 : 0.0) + normal(rng);
    }
  }
  return head;
}

namespace {

// Forward intermediates for one sample.
struct Activations {
  std::vector<double> q, u, s, p, vbar, out;
};

void forward(const AttentionHead& h, const RetrievalSample& x, std::size_t len, Activations& a) {
  const std::size_t d = h.dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  a.q.assign(d, 0.0);
  a.u.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += h.w_q[r * d + c] * x.query[c];
    a.q[r] = acc;
  }
  // u = W_k^T q, so s_j = u . k_j = (W_q q) . (W_k k_j).
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) a.u[c] += h.w_k[r * d + c] * a.q[r];
  }
  a.s.assign(len, 0.0);
  for (std::size_t j = 0; j < len; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += a.u[c] * x.keys[j * d + c];
    a.s[j] = acc * inv_sqrt_d;
  }
  const ScoreVector scores(a.s);
  a.p = h.normalizer == HeadNormalizer::softmax ? softmax(scores).values
                                                : consmax_train(scores, h.consmax).values;
  a.vbar.assign(d, 0.0);
  for (std::size_t j = 0; j < len; ++j) {
    for (std::size_t c = 0; c < d; ++c) a.vbar[c] += a.p[j] * x.values[j * d + c];
  }
  a.out.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += h.w_v[r * d + c] * a.vbar[c];
    a.out[r] = acc;
  }
}

double sample_error(const Activations& a, const RetrievalSample& x) {
  double e = 0.0;
  for (std::size_t r = 0; r < a.out.size(); ++r) {
    const double diff = a.out[r] - x.target[r];
    e += diff * diff;
  }
  return e;
}

}  // namespace

std::vector<double> AttentionHead::scores(const RetrievalSample& sample) const {
  Activations a;
  forward(*this, sample, sample.keys.size() / dim, a);
  return a.s;
}

double AttentionHead::loss(const RetrievalDataset& data) const {
  Activations a;
  double total = 0.0;
  for (const auto& x : data.samples) {
    forward(*this, x, data.seq_len, a);
    total += sample_error(a, x);
  }
  return total / static_cast<double>(data.samples.size() * dim);
}

double AttentionHead::loss_and_grad(const RetrievalDataset& data, HeadGrad& grad) const {
  const std::size_t d = dim;
  const std::size_t len = data.seq_len;
  const double norm = 1.0 / static_cast<double>(data.samples.size() * d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  grad.w_q.assign(d * d, 0.0);
  grad.w_k.assign(d * d, 0.0);
  grad.w_v.assign(d * d, 0.0);
  grad.d_beta = 0.0;
  grad.d_gamma = 0.0;

  Activations a;
  std::vector<double> d_out(d), d_vbar(d), d_p(len), d_u(d), d_q(d);
  double total = 0.0;
  for (const auto& x : data.samples) {
    forward(*this, x, len, a);
    total += sample_error(a, x);

    for (std::size_t r = 0; r < d; ++r) d_out[r] = 2.0 * (a.out[r] - x.target[r]) * norm;
    std::fill(d_vbar.begin(), d_vbar.end(), 0.0);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        grad.w_v[r * d + c] += d_out[r] * a.vbar[c];
        d_vbar[c] += w_v[r * d + c] * d_out[r];
      }
    }
    for (std::size_t j = 0; j < len; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += d_vbar[c] * x.values[j * d + c];
      d_p[j] = acc;
    }

    std::vector<double> d_s;
    if (normalizer == HeadNormalizer::softmax) {
      d_s = softmax_backward(a.p, d_p);
    } else {
      ConsmaxGrad g = consmax_backward(ScoreVector(a.s), consmax, d_p);
      d_s = std::move(g.d_scores);
      grad.d_beta += g.d_beta;
      grad.d_gamma += g.d_gamma;
    }

    std::fill(d_u.begin(), d_u.end(), 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      for (std::size_t c = 0; c < d; ++c) d_u[c] += d_s[j] * inv_sqrt_d * x.keys[j * d + c];
    }
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        grad.w_k[r * d + c] += a.q[r] * d_u[c];
        acc += w_k[r * d + c] * d_u[c];
      }
      d_q[r] = acc;
    }
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) grad.w_q[r * d + c] += d_q[r] * x.query[c];
    }
  }
  return total * norm;
}

void TrainConfig::validate() const {
  std::vector<std::string> issues;
  if (iterations < 1) issues.push_back("$.iterations: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    issues.push_back("$.learning_rate: must be finite and > 0");
  }
  if (beta_init_grid.empty()) issues.push_back("$.beta_init_grid: must not be empty");
  if (gamma_init_grid.empty()) issues.push_back("$.gamma_init_grid: must not be empty");
  for (std::size_t i = 0; i < beta_init_grid.size(); ++i) {
    if (!std::isfinite(beta_init_grid[i])) {
      issues.push_back("$.beta_init_grid[" + std::to_string(i) + "]: must be finite");
    }
  }
  for (std::size_t i = 0; i < gamma_init_grid.size(); ++i) {
    if (!(gamma_init_grid[i] > 0.0) || !std::isfinite(gamma_init_grid[i])) {
      issues.push_back("$.gamma_init_grid[" + std::to_string(i) + "]: must be finite and > 0");
    }
  }
  if (task.seq_len < 1) issues.push_back("$.task.seq_len: must be >= 1");
  if (task.dim < 1 || task.dim > 64) issues.push_back("$.task.dim: must be in [1, 64]");
  if (task.train_samples < 1) issues.push_back("$.task.train_samples: must be >= 1");
  if (task.val_samples < 1) issues.push_back("$.task.val_samples: must be >= 1");
  if (!(task.label_noise >= 0.0) || !std::isfinite(task.label_noise)) {
    issues.push_back("$.task.label_noise: must be finite and >= 0");
  }
  if (warmup_iters < 1) issues.push_back("$.warmup_iters: must be >= 1");
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

namespace {

constexpr double kGammaFloor = 1e-3;
constexpr std::uint64_t kInitSeedSalt = 0x9E3779B97F4A7C15ull;

struct Datasets {
  RetrievalDataset train;
  RetrievalDataset validation;
};

Datasets make_datasets(const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  Datasets ds;
  ds.train = RetrievalDataset::generate(cfg.task, cfg.task.train_samples, rng);
  ds.validation = RetrievalDataset::generate(cfg.task, cfg.task.val_samples, rng);
  return ds;
}

void check_finite(double loss, std::size_t iteration) {
  if (!std::isfinite(loss)) throw DivergenceError(iteration, "training loss is not finite");
}

}  // namespace

TrainTrace train_head(const RetrievalDataset& train, const RetrievalDataset& validation,
                      HeadNormalizer normalizer, double beta_init, double gamma_init,
                      std::size_t iterations, double learning_rate, std::uint64_t init_seed) {
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (!(gamma_init > 0.0)) throw InvalidParameter("gamma_init must be > 0");
  std::mt19937_64 rng(init_seed);
  TrainTrace trace;
  trace.normalizer = normalizer;
  trace.beta_init = beta_init;
  trace.gamma_init = gamma_init;
  trace.head = AttentionHead::init(train.dim, normalizer, beta_init, gamma_init, rng);
  trace.loss_curve.reserve(iterations);
  trace.beta_curve.reserve(iterations);
  trace.gamma_curve.reserve(iterations);

  AttentionHead& head = trace.head;
  HeadGrad grad;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double loss = head.loss_and_grad(train, grad);
    check_finite(loss, it);
    trace.loss_curve.push_back(loss);
    trace.beta_curve.push_back(head.consmax.beta);
    trace.gamma_curve.push_back(head.consmax.gamma);

    for (std::size_t i = 0; i < head.w_q.size(); ++i) {
      head.w_q[i] -= learning_rate * grad.w_q[i];
      head.w_k[i] -= learning_rate * grad.w_k[i];
      head.w_v[i] -= learning_rate * grad.w_v[i];
    }
    if (normalizer == HeadNormalizer::consmax) {
      head.consmax.beta -= learning_rate * grad.d_beta;
      head.consmax.gamma = std::max(kGammaFloor, head.consmax.gamma - learning_rate * grad.d_gamma);
    }
  }
  if (normalizer == HeadNormalizer::consmax) {
    head.consmax.merged_c = merge_constants(head.consmax.beta, head.consmax.gamma);
  }
  trace.final_loss = head.loss(train);
  check_finite(trace.final_loss, iterations);
  trace.final_beta = head.consmax.beta;
  trace.final_gamma = head.consmax.gamma;
  trace.validation_loss = head.loss(validation);
  return trace;
}

ToyTrainResult train_toy(const TrainConfig& cfg) {
  cfg.validate();
  const Datasets ds = make_datasets(cfg);
  const std::uint64_t init_seed = cfg.seed ^ kInitSeedSalt;
  const double gamma = cfg.gamma_init_grid.front();

  ToyTrainResult result;
  result.softmax = train_head(ds.train, ds.validation, HeadNormalizer::softmax, 0.0, 1.0,
                              cfg.iterations, cfg.learning_rate, init_seed);
  for (double beta : cfg.beta_init_grid) {
    result.consmax.push_back(train_head(ds.train, ds.validation, HeadNormalizer::consmax, beta,
                                        gamma, cfg.iterations, cfg.learning_rate, init_seed));
  }
  return result;
}

SweepResult sweep_init(const TrainConfig& cfg) {
  cfg.validate();
  const Datasets ds = make_datasets(cfg);
  const std::uint64_t init_seed = cfg.seed ^ kInitSeedSalt;

  SweepResult result;
  for (double beta : cfg.beta_init_grid) {
    for (double gamma : cfg.gamma_init_grid) {
      const TrainTrace t = train_head(ds.train, ds.validation, HeadNormalizer::consmax, beta,
                                      gamma, cfg.warmup_iters, cfg.learning_rate, init_seed);
      result.table.push_back({beta, gamma, t.validation_loss});
    }
  }
  result.best = *std::min_element(
      result.table.begin(), result.table.end(), [](const SweepEntry& a, const SweepEntry& b) {
        return std::tie(a.validation_loss, a.beta, a.gamma) <
               std::tie(b.validation_loss, b.beta, b.gamma);
      });
  return result;
}

double beta_spread(std::span<const TrainTrace> traces, std::size_t iteration) {
  if (traces.empty()) return 0.0;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& t : traces) {
    const double b = iteration < t.beta_curve.size() ? t.beta_curve[iteration] : t.final_beta;
    lo = std::min(lo, b);
    hi = std::max(hi, b);
  }
  return hi - lo;
}

double gamma_drift(const TrainTrace& trace) {
  double drift = std::fabs(trace.final_gamma - trace.gamma_init) / trace.gamma_init;
  for (double g : trace.gamma_curve) {
    drift = std::max(drift, std::fabs(g - trace.gamma_init) / trace.gamma_init);
  }
  return drift;
}

}  // namespace consmax
