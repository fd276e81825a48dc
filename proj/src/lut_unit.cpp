#include "consmax/lut_unit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "consmax/errors.hpp"

namespace consmax {

const char* to_string(SliceRole role) noexcept { return role == SliceRole::msb ? "MSB" : "LSB"; }

NibblePair split_int8(IntCode code) {
  if (code.value < -128 || code.value > 127) {
    throw InvalidArgument("INT8 code out of range: " + std::to_string(code.value));
  }
  // Arithmetic shift keeps the sign in the high nibble; the mask is the
  // unsigned remainder.
  return NibblePair{code.value >> 4, code.value & 0xF};
}

NibblePair split_uint8(IntCode code) {
  if (code.value < 0 || code.value > 255) {
    throw InvalidArgument("UINT8 code out of range: " + std::to_string(code.value));
  }
  return NibblePair{code.value >> 4, code.value & 0xF};
}

namespace {

LutTable build_table(SliceRole role, const QuantSpec& spec, std::vector<std::string>& overflow) {
  LutTable t;
  t.role = role;
  t.slice_weight = role == SliceRole::msb ? 16 : 1;
  t.signed_index = role == SliceRole::msb && spec.is_signed;
  for (std::size_t k = 0; k < t.entries.size(); ++k) {
    const long double arg = static_cast<long double>(spec.scale) * t.slice_weight * t.nibble_value(k);
    t.entries[k] = to_half(std::exp(arg));
    if (!t.entries[k].is_finite()) {
      std::ostringstream os;
      os << to_string(role) << "[" << k << "]=exp(" << static_cast<double>(arg) << ")";
      overflow.push_back(os.str());
    }
  }
  return t;
}

Half checked_constant(double merged_c) {
  if (!(merged_c > 0.0) || !std::isfinite(merged_c)) {
    throw InvalidParameter("merged constant C must be finite and > 0, got " +
                           std::to_string(merged_c));
  }
  const Half c = to_half(merged_c);
  if (!c.is_finite() || c.is_zero()) {
    throw InvalidParameter("merged constant C=" + std::to_string(merged_c) +
                           " is not representable as a nonzero finite binary16");
  }
  return c;
}

}  // namespace

ConsmaxUnit build_unit(const QuantSpec& spec, double merged_c) {
  spec.validate();
  if (spec.bitwidth != 8) {
    throw InvalidArgument("a ConSmax unit takes 8-bit codes, got bitwidth " +
                          std::to_string(spec.bitwidth));
  }
  ConsmaxUnit unit;
  unit.spec = spec;
  unit.c_half = checked_constant(merged_c);

  std::vector<std::string> overflow;
  unit.msb_lut = build_table(SliceRole::msb, spec, overflow);
  unit.lsb_lut = build_table(SliceRole::lsb, spec, overflow);
  if (!overflow.empty()) {
    std::ostringstream os;
    os << "scale " << spec.scale << " overflows binary16 LUT entries (need exp(entry) <= 65504):";
    for (const auto& e : overflow) os << ' ' << e;
    throw BuildError(os.str(), overflow);
  }
  return unit;
}

Half unit_eval(IntCode code, const ConsmaxUnit& unit) {
  const NibblePair n = unit.spec.is_signed ? split_int8(code) : split_uint8(code);
  const std::size_t msb_index = static_cast<std::size_t>(n.msb & 0xF);
  const Half e = half_mul(unit.msb_lut.entries[msb_index],
                          unit.lsb_lut.entries[static_cast<std::size_t>(n.lsb)]);
  return half_mul(e, unit.c_half);
}

long double exact_eval(IntCode code, const QuantSpec& spec, double merged_c) {
  return static_cast<long double>(merged_c) *
         std::exp(static_cast<long double>(spec.scale) * code.value);
}

Half direct_eval(IntCode code, const QuantSpec& spec, double merged_c) {
  return to_half(exact_eval(code, spec, merged_c));
}

ReductionUnit build_reduction_unit(const QuantSpec& spec16, double merged_c) {
  spec16.validate();
  if (spec16.bitwidth != 16 || !spec16.is_signed) {
    throw InvalidArgument("reduction unit expects a signed 16-bit spec");
  }
  ReductionUnit ru;
  ru.spec = spec16;
  ru.units.push_back(build_unit(QuantSpec{8, spec16.scale * 256.0, true}, merged_c));
  ru.units.push_back(build_unit(QuantSpec{8, spec16.scale, false}, 1.0));
  ru.chain_length = ru.units.size() - 1;
  return ru;
}

Half reduce16(IntCode code, const ReductionUnit& ru) {
  if (ru.spec.bitwidth != 16 || ru.units.size() != 2 || ru.chain_length != 1 ||
      !ru.units[0].spec.is_signed || ru.units[1].spec.is_signed) {
    throw InvalidArgument("reduction unit is not configured for 16-bit mode");
  }
  if (!ru.spec.contains(code.value)) {
    throw InvalidArgument("INT16 code out of range: " + std::to_string(code.value));
  }
  const IntCode high{code.value >> 8};
  const IntCode low{code.value & 0xFF};
  Half acc = unit_eval(high, ru.units[0]);
  acc = half_mul(acc, unit_eval(low, ru.units[1]));
  return acc;
}

LutErrorStats lut_error_report(const QuantSpec& spec, double merged_c) {
  spec.validate();
  LutErrorStats stats;
  double rel_sum = 0.0;

  auto accumulate = [&](IntCode code, Half got) {
    const long double exact = exact_eval(code, spec, merged_c);
    const double rel = static_cast<double>(std::fabs(got.to_double() - exact) / exact);
    stats.max_rel_error = std::max(stats.max_rel_error, rel);
    rel_sum += rel;
    stats.max_ulp_diff_vs_direct =
        std::max(stats.max_ulp_diff_vs_direct, ulp_distance(got, direct_eval(code, spec, merged_c)));
    ++stats.samples;
  };

  if (spec.bitwidth == 8) {
    const ConsmaxUnit unit = build_unit(spec, merged_c);
    for (std::int32_t v = spec.min_code(); v <= spec.max_code(); ++v) {
      accumulate(IntCode{v}, unit_eval(IntCode{v}, unit));
    }
  } else {
    const ReductionUnit ru = build_reduction_unit(spec, merged_c);
    for (std::int32_t v = spec.min_code(); v <= spec.max_code(); ++v) {
      accumulate(IntCode{v}, reduce16(IntCode{v}, ru));
    }
  }
  stats.mean_rel_error = rel_sum / static_cast<double>(stats.samples);
  return stats;
}

std::string lut_dump(const ConsmaxUnit& unit) {
  std::string out;
  for (const LutTable* t : {&unit.msb_lut, &unit.lsb_lut}) {
    for (std::size_t k = 0; k < t->entries.size(); ++k) {
      out += to_string(t->role);
      out += ':' + std::to_string(k) + ':' + to_hex(t->entries[k]) + '\n';
    }
  }
  out += "C:" + to_hex(unit.c_half) + '\n';
  return out;
}

std::string lut_dump(const ReductionUnit& ru) {
  std::string out;
  for (const auto& unit : ru.units) out += lut_dump(unit);
  return out;
}

}  // namespace consmax
