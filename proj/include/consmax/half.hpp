#pragma once

// Software IEEE 754 binary16. All arithmetic works on the bit pattern so
// results are identical on every host; no native half type is used.

#include <cstdint>
#include <string>
#include <string_view>

namespace consmax {

class Half {
 public:
  static constexpr std::uint16_t kSignMask = 0x8000;
  static constexpr std::uint16_t kExpMask = 0x7C00;
  static constexpr std::uint16_t kFracMask = 0x03FF;
  static constexpr std::uint16_t kQuietNaN = 0x7E00;
  static constexpr std::uint16_t kPosInf = 0x7C00;
  static constexpr std::uint16_t kOne = 0x3C00;
  static constexpr double kMax = 65504.0;

  constexpr Half() = default;
  static constexpr Half from_bits(std::uint16_t bits) { return Half(bits); }

  constexpr std::uint16_t bits() const noexcept { return bits_; }
  constexpr bool sign() const noexcept { return (bits_ & kSignMask) != 0; }
  constexpr bool is_nan() const noexcept {
    return (bits_ & kExpMask) == kExpMask && (bits_ & kFracMask) != 0;
  }
  constexpr bool is_inf() const noexcept { return (bits_ & 0x7FFF) == kPosInf; }
  constexpr bool is_finite() const noexcept { return (bits_ & kExpMask) != kExpMask; }
  constexpr bool is_zero() const noexcept { return (bits_ & 0x7FFF) == 0; }

  /// Exact widening conversion.
  double to_double() const noexcept;

  friend constexpr bool operator==(Half a, Half b) noexcept { return a.bits_ == b.bits_; }

 private:
  explicit constexpr Half(std::uint16_t bits) : bits_(bits) {}
  std::uint16_t bits_ = 0;
};

/// Correctly rounded (round-to-nearest-even) narrowing. Overflows to
/// +/-infinity, underflows gradually through subnormals, NaN maps to a quiet NaN.
Half to_half(double x);
Half to_half(long double x);

/// Correctly rounded binary16 product, computed on integer significands.
Half half_mul(Half a, Half b);

/// Distance in representable steps between two finite values of the same sign.
std::uint32_t ulp_distance(Half a, Half b);

/// Four uppercase hex digits, most significant nibble first ("3C00").
std::string to_hex(Half h);
/// Inverse of to_hex; accepts upper or lower case. Throws InvalidArgument.
Half half_from_hex(std::string_view text);

}  // namespace consmax
