#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "consmax/errors.hpp"
#include "consmax/lut_unit.hpp"
#include "oracles.hpp"

using namespace consmax;

namespace {

constexpr double kU = 1.0 / 2048.0;  // binary16 unit roundoff

// unit_eval rebuilt from MPFR-rounded tables and MPFR-rounded products.
std::uint16_t oracle_unit(int msb, int lsb, double scale, double c) {
  const auto hi = oracle::half_exp(scale * 16 * msb);
  const auto lo = oracle::half_exp(scale * lsb);
  return oracle::half_product(oracle::half_product(hi, lo), oracle::half_of_double(c));
}

}  // namespace

TEST_CASE("split_int8 examples and reconstruction") {
  CHECK(split_int8(IntCode{0}) == NibblePair{0, 0});
  CHECK(split_int8(IntCode{127}) == NibblePair{7, 15});
  CHECK(split_int8(IntCode{-128}) == NibblePair{-8, 0});
  CHECK(split_int8(IntCode{-1}) == NibblePair{-1, 15});
  for (int v = -128; v <= 127; ++v) {
    const auto n = split_int8(IntCode{v});
    CHECK(16 * n.msb + n.lsb == v);
    CHECK(n.msb >= -8);
    CHECK(n.msb <= 7);
    CHECK(n.lsb >= 0);
    CHECK(n.lsb <= 15);
  }
  for (int v = 0; v <= 255; ++v) {
    const auto n = split_uint8(IntCode{v});
    CHECK(16 * n.msb + n.lsb == v);
  }
  CHECK_THROWS_AS(split_int8(IntCode{128}), InvalidArgument);
  CHECK_THROWS_AS(split_uint8(IntCode{-1}), InvalidArgument);
}

TEST_CASE("build_unit tables match the MPFR oracle") {
  const QuantSpec spec{};
  const auto unit = build_unit(spec, 1.0);
  CHECK(unit.lsb_lut.entries[0].bits() == 0x3C00);
  CHECK(unit.lsb_lut.slice_weight == 1);
  CHECK(unit.msb_lut.slice_weight == 16);
  CHECK(unit.msb_lut.signed_index);
  CHECK_FALSE(unit.lsb_lut.signed_index);
  CHECK(unit.msb_lut.entries[1].bits() == oracle::half_exp(1.0));
  CHECK(unit.msb_lut.entries[1].bits() == 0x4170);
  CHECK(unit.msb_lut.entries[8].bits() == oracle::half_exp(-8.0));  // nibble -8
  CHECK(unit.lsb_lut.entries[1].bits() == oracle::half_exp(1.0 / 16));
  for (std::size_t k = 0; k < 16; ++k) {
    CHECK(unit.lsb_lut.entries[k].bits() == oracle::half_exp(spec.scale * static_cast<double>(k)));
    CHECK(unit.msb_lut.entries[k].bits() == oracle::half_exp(spec.scale * 16 * unit.msb_lut.nibble_value(k)));
  }
  CHECK(unit.c_half.bits() == 0x3C00);
}

TEST_CASE("build_unit rejects unrepresentable configs") {
  try {
    build_unit(QuantSpec{8, 0.1, true}, 1.0);
    FAIL("expected BuildError");
  } catch (const BuildError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("MSB[7]") != std::string::npos);
    CHECK(msg.find("MSB[6]") == std::string::npos);
  }
  CHECK_NOTHROW(build_unit(QuantSpec{8, 0.099, true}, 1.0));
  CHECK_THROWS_AS(build_unit(QuantSpec{16, 1.0 / 4096, true}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(build_unit(QuantSpec{}, 0.0), InvalidParameter);
  CHECK_THROWS_AS(build_unit(QuantSpec{}, 1e9), InvalidParameter);  // C overflows binary16
}

TEST_CASE("unit_eval is bit-exact against the oracle for every code") {
  const QuantSpec spec{};
  for (double c : {1.0, 0.0036787944117144233, 0.37, 5.5}) {
    const auto unit = build_unit(spec, c);
    for (int v = -128; v <= 127; ++v) {
      const auto n = split_int8(IntCode{v});
      CHECK(unit_eval(IntCode{v}, unit).bits() == oracle_unit(n.msb, n.lsb, spec.scale, c));
    }
  }
}

TEST_CASE("unit_eval examples and error bounds") {
  const QuantSpec spec{};
  const auto unit = build_unit(spec, 1.0);
  CHECK(unit_eval(IntCode{0}, unit).bits() == 0x3C00);
  CHECK(std::fabs(unit_eval(IntCode{16}, unit).to_double() - std::exp(1.0)) / std::exp(1.0) <= 3 * kU);
  CHECK(std::fabs(unit_eval(IntCode{-128}, unit).to_double() - std::exp(-8.0)) / std::exp(-8.0) <= 3 * kU);

  CHECK(direct_eval(IntCode{0}, spec, 1.0).bits() == 0x3C00);
  CHECK(direct_eval(IntCode{64}, spec, 1.0).bits() == oracle::half_exp(4.0));
  for (int v = -128; v <= 127; ++v) {
    CHECK(direct_eval(IntCode{v}, spec, 1.0).bits() == oracle::half_exp(v / 16.0));
  }

  // Code 0 reproduces C exactly.
  for (double c : {0.001, 0.5, 3.0}) {
    CHECK(unit_eval(IntCode{0}, build_unit(spec, c)) == to_half(c));
  }
}

TEST_CASE("exhaustive 8-bit error report") {
  const QuantSpec spec{};
  const auto stats = lut_error_report(spec, 1.0);
  CHECK(stats.samples == 256);
  CHECK(stats.max_ulp_diff_vs_direct <= 2);
  CHECK(stats.max_rel_error <= 4 * kU);
  CHECK(stats.max_rel_error >= stats.mean_rel_error);
  CHECK(stats.mean_rel_error >= 0.0);

  // Independent recomputation of the relative error against MPFR.
  const auto unit = build_unit(spec, 1.0);
  double worst = 0.0;
  for (int v = -128; v <= 127; ++v) {
    const double exact = oracle::exp_scaled(v / 16.0, 1.0);
    worst = std::max(worst, std::fabs(unit_eval(IntCode{v}, unit).to_double() - exact) / exact);
  }
  CHECK(worst == doctest::Approx(stats.max_rel_error).epsilon(1e-9));

  // Exact values increase strictly; the LUT path stays within the bound of them.
  double prev = 0.0;
  for (int v = -128; v <= 127; ++v) {
    const double exact = oracle::exp_scaled(v / 16.0, 1.0);
    CHECK(exact > prev);
    prev = exact;
  }

  // Tiny scale: every entry rounds near 1.0 and the error is pure binary16 quantization.
  const auto fine = lut_error_report(QuantSpec{8, 1e-6, true}, 1.0);
  CHECK(fine.max_rel_error <= 4 * kU);
}

TEST_CASE("reduction unit") {
  const QuantSpec spec16{16, 1.0 / 4096, true};
  const double c = 0.25;
  const auto ru = build_reduction_unit(spec16, c);
  REQUIRE(ru.units.size() == 2);
  CHECK(ru.chain_length == 1);
  CHECK(ru.units[0].spec.scale == spec16.scale * 256);
  CHECK(ru.units[1].spec.scale == spec16.scale);
  CHECK_FALSE(ru.units[1].spec.is_signed);
  CHECK(ru.units[0].c_half == to_half(c));
  CHECK(ru.units[1].c_half.bits() == 0x3C00);

  CHECK(reduce16(IntCode{0}, ru) == to_half(c));

  const double exact = c * std::exp(1.0 / 16);
  const double got = reduce16(IntCode{256}, ru).to_double();
  CHECK(std::fabs(got - exact) / exact <= 7 * kU);

  for (std::int32_t code = -32768; code <= 32767; ++code) {
    const std::int32_t h = code >> 8, l = code & 0xFF;
    REQUIRE(256 * h + l == code);
    REQUIRE(h >= -128);
    REQUIRE(h <= 127);
  }

  // Low byte zero: the high unit's output times an exact 1.0.
  const auto low1 = build_reduction_unit(spec16, 1.0);
  for (int h = -128; h <= 127; ++h) {
    const Half r = reduce16(IntCode{256 * h}, ru);
    const Half high = unit_eval(IntCode{h}, ru.units[0]);
    CHECK(r == high);
    const Half unscaled = reduce16(IntCode{256 * h}, low1);
    CHECK(ulp_distance(half_mul(unscaled, to_half(c)), r) <= 1);
  }

  // Bit-exact against the oracle chain on a stride of codes.
  for (std::int32_t code = -32768; code <= 32767; code += 97) {
    const std::int32_t h = code >> 8, l = code & 0xFF;
    const auto hn = split_int8(IntCode{h});
    const auto ln = split_uint8(IntCode{l});
    const auto high = oracle_unit(hn.msb, hn.lsb, spec16.scale * 256, c);
    const auto low = oracle_unit(ln.msb, ln.lsb, spec16.scale, 1.0);
    CHECK(reduce16(IntCode{code}, ru).bits() == oracle::half_product(high, low));
  }

  const auto stats = lut_error_report(spec16, c);
  CHECK(stats.samples == 65536);
  CHECK(stats.max_rel_error <= 8 * kU);

  CHECK_THROWS_AS(build_reduction_unit(QuantSpec{}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(reduce16(IntCode{40000}, ru), InvalidArgument);
  auto broken = ru;
  broken.units.pop_back();
  CHECK_THROWS_AS(reduce16(IntCode{1}, broken), InvalidArgument);
}

TEST_CASE("lut dump format") {
  const auto unit = build_unit(QuantSpec{}, 1.0);
  const std::string dump = lut_dump(unit);
  std::istringstream in(dump);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 33);
  CHECK(lines[0] == "MSB:0:3C00");
  CHECK(lines[16] == "LSB:0:3C00");
  CHECK(lines[1] == "MSB:1:4170");
  CHECK(lines[32] == "C:3C00");
  CHECK(dump == lut_dump(build_unit(QuantSpec{}, 1.0)));

  const std::string dump16 = lut_dump(build_reduction_unit(QuantSpec{16, 1.0 / 4096, true}, 1.0));
  CHECK(std::count(dump16.begin(), dump16.end(), '\n') == 66);
}
