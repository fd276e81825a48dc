#pragma once

// Bit-exact model of the bitwidth-split ConSmax unit. An 8-bit code
// x = 16*msb + lsb is evaluated as exp(16*msb*s) * exp(lsb*s) * C with two
// 16-entry binary16 tables and two binary16 multipliers. Two units chained
// by a reduction multiplier cover 16-bit codes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "consmax/half.hpp"
#include "consmax/quant.hpp"

namespace consmax {

enum class SliceRole { msb, lsb };

const char* to_string(SliceRole role) noexcept;

struct LutTable {
  std::array<Half, 16> entries{};
  SliceRole role = SliceRole::lsb;
  int slice_weight = 1;        // 16 for the MSB slice, 1 for the LSB slice
  bool signed_index = false;   // MSB index read as a two's-complement nibble

  /// Integer nibble value addressed by table index k.
  int nibble_value(std::size_t k) const noexcept {
    const int v = static_cast<int>(k);
    return (signed_index && v >= 8) ? v - 16 : v;
  }
};

struct ConsmaxUnit {
  LutTable msb_lut;
  LutTable lsb_lut;
  Half c_half;
  QuantSpec spec;  // 8-bit; scale is the real value of one input LSB
};

struct NibblePair {
  int msb = 0;  // [-8, 7] signed, [0, 15] unsigned
  int lsb = 0;  // [0, 15]

  friend constexpr bool operator==(NibblePair, NibblePair) noexcept = default;
};

/// Two's-complement high nibble and unsigned low nibble with 16*msb + lsb == code.
/// Throws InvalidArgument outside [-128, 127].
NibblePair split_int8(IntCode code);

/// Same split for an unsigned byte in [0, 255].
NibblePair split_uint8(IntCode code);

/// Builds both tables by rounding exp(scale * w * v) once from extended
/// precision. Throws BuildError naming every entry that is not a finite
/// binary16, and InvalidParameter for a non-positive or unrepresentable C.
ConsmaxUnit build_unit(const QuantSpec& spec, double merged_c);

/// (msb_lut[msb] * lsb_lut[lsb]) * C, both products rounded to binary16.
Half unit_eval(IntCode code, const ConsmaxUnit& unit);

/// Monolithic 256-entry-table equivalent: C * exp(scale * code) evaluated in
/// extended precision and rounded once.
Half direct_eval(IntCode code, const QuantSpec& spec, double merged_c);

/// Extended-precision C * exp(scale * code), unrounded.
long double exact_eval(IntCode code, const QuantSpec& spec, double merged_c);

struct ReductionUnit {
  /// Chain order: high byte (signed, C folded in) then low byte (unsigned, C = 1).
  std::vector<ConsmaxUnit> units;
  std::size_t chain_length = 0;  // multipliers between unit outputs
  QuantSpec spec;                // 16-bit input format
};

/// Two 8-bit units for a signed 16-bit code. The high unit's tables use
/// scale * 256 so its exponent weights carry the extra 2^8 factor.
ReductionUnit build_reduction_unit(const QuantSpec& spec16, double merged_c);

/// Splits into high signed byte h and low unsigned byte l (256*h + l == code),
/// evaluates each unit and multiplies the partial results left to right.
/// Throws InvalidArgument when the unit is not a 16-bit configuration.
Half reduce16(IntCode code, const ReductionUnit& ru);

struct LutErrorStats {
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  std::uint32_t max_ulp_diff_vs_direct = 0;
  std::size_t samples = 0;
};

/// Exhaustive comparison over every code of `spec`: the split-LUT path
/// (unit_eval for 8-bit, reduce16 for 16-bit) against direct_eval (ULP gap)
/// and against exact_eval (relative error).
LutErrorStats lut_error_report(const QuantSpec& spec, double merged_c);

/// Text dump, one line per entry: "MSB:<k>:<hex>" x16, "LSB:<k>:<hex>" x16,
/// then "C:<hex>". A reduction unit dumps its units in chain order.
std::string lut_dump(const ConsmaxUnit& unit);
std::string lut_dump(const ReductionUnit& ru);

}  // namespace consmax
