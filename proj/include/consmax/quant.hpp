#pragma once

#include <cstdint>

#include "consmax/half.hpp"

namespace consmax {

/// Integer score format: 8 or 16 bits, `scale` real units per LSB.
struct QuantSpec {
  int bitwidth = 8;
  double scale = 1.0 / 16.0;
  bool is_signed = true;

  /// Throws InvalidParameter unless bitwidth is 8 or 16 and scale is finite and > 0.
  void validate() const;

  std::int32_t min_code() const noexcept;
  std::int32_t max_code() const noexcept;
  bool contains(std::int32_t value) const noexcept {
    return value >= min_code() && value <= max_code();
  }
};

struct IntCode {
  std::int32_t value = 0;

  friend constexpr bool operator==(IntCode a, IntCode b) noexcept = default;
};

/// round(x / scale), half away from zero, saturated to the code range.
IntCode quantize(double x, const QuantSpec& spec);

/// code * scale. Throws InvalidArgument for codes outside the range.
double dequantize(IntCode code, const QuantSpec& spec);

/// Converts a binary16 normalizer output back to an integer code; the
/// hardware's FP-to-INT stage. NaN maps to 0, infinities saturate.
IntCode requantize(Half value, const QuantSpec& spec);

}  // namespace consmax
