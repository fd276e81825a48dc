#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "consmax/errors.hpp"
#include "consmax/softmax.hpp"
#include "oracles.hpp"

using namespace consmax;

namespace {

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> s(n);
  for (auto& x : s) x = d(rng);
  return s;
}

}  // namespace

TEST_CASE("softmax examples") {
  auto uniform = softmax(ScoreVector({0, 0, 0, 0}));
  for (double v : uniform.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(uniform.normalized);

  for (double x : {-1e6, -3.5, 0.0, 42.0, 1e300}) {
    CHECK(softmax(ScoreVector({x})).values[0] == 1.0);
  }

  // 1/(1+e+e^2), e/(...), e^2/(...)
  const double z = 1.0 + std::exp(1.0) + std::exp(2.0);
  const auto r = softmax(ScoreVector({1, 2, 3}));
  CHECK(std::fabs(r.values[0] - 1.0 / z) < 1e-15);
  CHECK(std::fabs(r.values[0] - 0.09003057) < 1e-7);
  CHECK(std::fabs(r.values[1] - 0.24472847) < 1e-7);
  CHECK(std::fabs(r.values[2] - 0.66524096) < 1e-7);
}

TEST_CASE("score vectors reject empty and non-finite input") {
  CHECK_THROWS_AS(ScoreVector({}), InvalidArgument);
  CHECK_THROWS_AS(ScoreVector({1.0, NAN}), InvalidArgument);
  CHECK_THROWS_AS(ScoreVector({INFINITY}), InvalidArgument);
}

TEST_CASE("consmax_train examples") {
  CHECK(consmax_train(ScoreVector({0}), {0, 1, std::nullopt}).values[0] == 1.0);

  const auto r = consmax_train(ScoreVector({1, 2}), {1, 100, std::nullopt});
  CHECK(std::fabs(r.values[0] - 0.01) < 1e-9);
  CHECK(std::fabs(r.values[1] - std::exp(1.0) / 100.0) < 1e-9);
  CHECK_FALSE(r.normalized);

  CHECK_THROWS_AS(consmax_train(ScoreVector({1}), {0, 0, std::nullopt}), InvalidParameter);
  CHECK_THROWS_AS(consmax_train(ScoreVector({1}), {0, -2, std::nullopt}), InvalidParameter);
}

TEST_CASE("merge_constants") {
  CHECK(merge_constants(0, 1) == 1.0);
  CHECK(std::fabs(merge_constants(1, 100) - 0.0036787944117144233) < 1e-12);
  CHECK(std::fabs(merge_constants(-std::log(2.0), 2) - 1.0) < 1e-15);
  CHECK_THROWS_AS(merge_constants(0, 0), InvalidParameter);
  CHECK_THROWS_AS(merge_constants(1, 100, MergeMode::negative_literal), InvalidParameter);

  const auto p = ConsmaxParams::make(1, 100);
  REQUIRE(p.merged_c.has_value());
  CHECK(*p.merged_c == merge_constants(1, 100));
}

TEST_CASE("consmax_infer") {
  CHECK(consmax_infer(ScoreVector({0}), 1.0).values[0] == 1.0);

  const auto inf = consmax_infer(ScoreVector({1, 2}), merge_constants(1, 100));
  const auto tr = consmax_train(ScoreVector({1, 2}), {1, 100, std::nullopt});
  CHECK(oracle::max_rel_diff(inf.values, tr.values) < 1e-12);

  const auto tiny = consmax_infer(ScoreVector({-1000}), 1.0);
  CHECK(tiny.values[0] >= 0.0);
  CHECK(tiny.values[0] < 1e-300);

  CHECK_THROWS_AS(consmax_infer(ScoreVector({0}), 0.0), InvalidParameter);
  CHECK_THROWS_AS(consmax_infer(ScoreVector({0}), -1.0), InvalidParameter);
}

TEST_CASE("partial_softmax examples") {
  const ScoreVector s({1, 2, 3, 4});
  const auto full = softmax(s);

  auto [one, t1] = partial_softmax(s, 4);
  CHECK(one.values == full.values);
  CHECK(t1.sync_ops == 2);
  CHECK(t1.num_blocks == 1);

  auto [two, t2] = partial_softmax(s, 2);
  CHECK(oracle::max_rel_diff(two.values, full.values) < 1e-15);
  CHECK(t2.local_maxima == std::vector<double>{2, 4});
  REQUIRE(t2.local_sums.size() == 2);
  for (double l : t2.local_sums) CHECK(std::fabs(l - (std::exp(-1.0) + 1.0)) < 1e-15);
  CHECK(t2.sync_ops == 4);

  auto [unit, t3] = partial_softmax(s, 1);
  CHECK(oracle::max_rel_diff(unit.values, full.values) < 1e-15);
  CHECK(t3.num_blocks == 4);

  auto [big, t4] = partial_softmax(s, 100);
  CHECK(big.values == full.values);
  CHECK(t4.num_blocks == 1);

  CHECK_THROWS_AS(partial_softmax(s, 0), InvalidArgument);
  CHECK(partial_softmax_sync_ops(1024, 128) == 16);
}

TEST_CASE("softmax matches the long double oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 1024);
  for (int k = 0; k < 500; ++k) {
    const auto s = random_scores(rng, len(rng), 1.0 + k % 10);
    CHECK(oracle::max_rel_diff(softmax(ScoreVector(s)).values, oracle::softmax(s)) < 1e-12);
  }
}

TEST_CASE("softmax shift invariance") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  for (int k = 0; k < 200; ++k) {
    auto s = random_scores(rng, 1 + k % 64, 3.0);
    const double c = shift(rng);
    auto shifted = s;
    for (auto& x : shifted) x += c;
    CHECK(oracle::max_rel_diff(softmax(ScoreVector(s)).values, softmax(ScoreVector(shifted)).values) < 1e-12);
  }
}

TEST_CASE("consmax shift equivariance and element independence") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0), g(0.5, 200.0);
  for (int k = 0; k < 200; ++k) {
    auto s = random_scores(rng, 1 + k % 32, 2.0);
    const double beta = u(rng), gamma = g(rng), c = u(rng);
    auto shifted = s;
    for (auto& x : shifted) x += c;
    const auto a = consmax_train(ScoreVector(s), {beta, gamma, std::nullopt});
    const auto b = consmax_train(ScoreVector(shifted), {beta + c, gamma, std::nullopt});
    CHECK(oracle::max_rel_diff(a.values, b.values) < 1e-12);

    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ps[i] = s[perm[i]];
    const auto p = consmax_train(ScoreVector(ps), {beta, gamma, std::nullopt});
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(p.values[i] == a.values[perm[i]]);
  }
}

TEST_CASE("partial softmax equals softmax for every block size") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 2u, 7u, 33u, 128u, 200u}) {
    const auto s = random_scores(rng, n, 4.0);
    const auto ref = oracle::softmax(s);
    for (std::size_t b = 1; b <= n; ++b) {
      const auto [out, trace] = partial_softmax(ScoreVector(s), b);
      CHECK(oracle::max_rel_diff(out.values, ref) < 1e-12);
      CHECK(trace.sync_ops == 2 * ((n + b - 1) / b));
      CHECK(out.normalized);
    }
  }
}

TEST_CASE("consmax reduces to softmax with beta=0, gamma=sum exp") {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 300; ++k) {
    const auto s = random_scores(rng, 1 + k * 3, 2.0);
    long double z = 0.0L;
    for (double x : s) z += std::exp(static_cast<long double>(x));
    const auto c = consmax_train(ScoreVector(s), {0.0, static_cast<double>(z), std::nullopt});
    CHECK(oracle::max_rel_diff(c.values, oracle::softmax(s)) < 1e-10);
  }
}

TEST_CASE("consmax output is not renormalized") {
  std::mt19937_64 rng(5);
  bool saw_non_unit = false;
  for (int k = 0; k < 20; ++k) {
    const auto s = random_scores(rng, 8, 1.0);
    const auto c = consmax_train(ScoreVector(s), {1.0, 100.0, std::nullopt});
    saw_non_unit = saw_non_unit || std::fabs(c.sum() - 1.0) > 0.0;
  }
  CHECK(saw_non_unit);
}
