#include "consmax/quant.hpp"

#include <cmath>
#include <string>

#include "consmax/errors.hpp"

namespace consmax {

void QuantSpec::validate() const {
  if (bitwidth != 8 && bitwidth != 16) {
    throw InvalidParameter("bitwidth must be 8 or 16, got " + std::to_string(bitwidth));
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidParameter("scale must be finite and > 0, got " + std::to_string(scale));
  }
}

std::int32_t QuantSpec::min_code() const noexcept {
  return is_signed ? -(std::int32_t{1} << (bitwidth - 1)) : 0;
}

std::int32_t QuantSpec::max_code() const noexcept {
  return is_signed ? (std::int32_t{1} << (bitwidth - 1)) - 1 : (std::int32_t{1} << bitwidth) - 1;
}

IntCode quantize(double x, const QuantSpec& spec) {
  spec.validate();
  const double lo = spec.min_code();
  const double hi = spec.max_code();
  if (std::isnan(x)) return IntCode{0};
  // std::round rounds halfway cases away from zero.
  const double r = std::round(x / spec.scale);
  if (r <= lo) return IntCode{spec.min_code()};
  if (r >= hi) return IntCode{spec.max_code()};
  return IntCode{static_cast<std::int32_t>(r)};
}

double dequantize(IntCode code, const QuantSpec& spec) {
  spec.validate();
  if (!spec.contains(code.value)) {
    throw InvalidArgument("code " + std::to_string(code.value) + " outside [" +
                          std::to_string(spec.min_code()) + ", " +
                          std::to_string(spec.max_code()) + "]");
  }
  return code.value * spec.scale;
}

IntCode requantize(Half value, const QuantSpec& spec) {
  if (value.is_nan()) return IntCode{0};
  return quantize(value.to_double(), spec);
}

}  // namespace consmax
