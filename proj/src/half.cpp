#include "consmax/half.hpp"

#include <cmath>
#include <cstdlib>

#include "consmax/errors.hpp"

namespace consmax {

namespace {

constexpr int kBias = 15;
constexpr int kFracBits = 10;
constexpr int kMinNormalExp = -14;
constexpr int kMaxExp = 15;

// Pack a rounded significand. `q` counts units of 2^(exp - 10); for the
// subnormal range exp is pinned to -14 and q < 1024 (q == 1024 carries into
// the smallest normal, which the bit layout handles on its own).
std::uint16_t pack(bool negative, int exp, std::uint64_t q) {
  const std::uint16_t sign = negative ? Half::kSignMask : 0;
  if (q == 0) return sign;
  if (q < (1u << kFracBits)) return static_cast<std::uint16_t>(sign | q);
  if (q == (2u << kFracBits)) {
    q = 1u << kFracBits;
    ++exp;
  }
  if (exp > kMaxExp) return sign | Half::kPosInf;
  const auto biased = static_cast<std::uint16_t>(exp + kBias);
  return static_cast<std::uint16_t>(sign | (biased << kFracBits) |
                                    (q - (1u << kFracBits)));
}

template <typename Float>
Half narrow(Float x) {
  if (std::isnan(x)) return Half::from_bits(Half::kQuietNaN);
  const bool negative = std::signbit(x);
  const Float mag = std::fabs(x);
  if (std::isinf(mag)) return Half::from_bits((negative ? Half::kSignMask : 0) | Half::kPosInf);
  if (mag == Float(0)) return Half::from_bits(negative ? Half::kSignMask : 0);

  int exp = std::ilogb(mag);
  if (exp > kMaxExp + 1) return Half::from_bits((negative ? Half::kSignMask : 0) | Half::kPosInf);
  if (exp < kMinNormalExp) exp = kMinNormalExp;

  // Scaling by a power of two and splitting off the fraction are both exact,
  // so the tie test below sees the true remainder.
  const Float scaled = std::ldexp(mag, kFracBits - exp);
  const Float floor_part = std::floor(scaled);
  const Float frac = scaled - floor_part;
  auto q = static_cast<std::uint64_t>(floor_part);
  if (frac > Float(0.5) || (frac == Float(0.5) && (q & 1u))) ++q;
  return Half::from_bits(pack(negative, exp, q));
}

struct Unpacked {
  bool negative;
  int exp;             // value = sig * 2^(exp - 10)
  std::uint32_t sig;   // 11 bits, top bit set after normalization
};

Unpacked unpack_finite_nonzero(Half h) {
  const std::uint16_t b = h.bits();
  Unpacked u{h.sign(), 0, 0};
  const int field = (b & Half::kExpMask) >> kFracBits;
  const std::uint32_t frac = b & Half::kFracMask;
  if (field == 0) {
    u.exp = kMinNormalExp;
    u.sig = frac;
    while ((u.sig & (1u << kFracBits)) == 0) {
      u.sig <<= 1;
      --u.exp;
    }
  } else {
    u.exp = field - kBias;
    u.sig = frac | (1u << kFracBits);
  }
  return u;
}

}  // namespace

double Half::to_double() const noexcept {
  const int field = (bits_ & kExpMask) >> kFracBits;
  const int frac = bits_ & kFracMask;
  double mag;
  if (field == 0x1F) {
    mag = frac ? std::nan("") : INFINITY;
  } else if (field == 0) {
    mag = std::ldexp(static_cast<double>(frac), kMinNormalExp - kFracBits);
  } else {
    mag = std::ldexp(static_cast<double>(frac | (1 << kFracBits)), field - kBias - kFracBits);
  }
  return sign() ? -mag : mag;
}

Half to_half(double x) { return narrow(x); }
Half to_half(long double x) { return narrow(x); }

Half half_mul(Half a, Half b) {
  const std::uint16_t sign = (a.bits() ^ b.bits()) & Half::kSignMask;
  if (a.is_nan()) return Half::from_bits(a.bits() | 0x0200);
  if (b.is_nan()) return Half::from_bits(b.bits() | 0x0200);
  if (a.is_inf() || b.is_inf()) {
    if (a.is_zero() || b.is_zero()) return Half::from_bits(Half::kQuietNaN);
    return Half::from_bits(sign | Half::kPosInf);
  }
  if (a.is_zero() || b.is_zero()) return Half::from_bits(sign);

  const Unpacked ua = unpack_finite_nonzero(a);
  const Unpacked ub = unpack_finite_nonzero(b);

  // product = prod * 2^(base_exp); prod has 21 or 22 significant bits.
  const std::uint64_t prod = static_cast<std::uint64_t>(ua.sig) * ub.sig;
  const int base_exp = ua.exp + ub.exp - 2 * kFracBits;
  const int top_bit = (prod >> 21) ? 21 : 20;
  int exp = base_exp + top_bit;
  if (exp < kMinNormalExp) exp = kMinNormalExp;

  // Keep units of 2^(exp - 10); round the dropped bits to nearest, ties to even.
  const int shift = (exp - kFracBits) - base_exp;
  std::uint64_t q;
  if (shift >= 63) {
    q = 0;  // below half of the smallest subnormal
  } else {
    q = prod >> shift;
    const std::uint64_t rem = prod & ((std::uint64_t{1} << shift) - 1);
    const std::uint64_t half = std::uint64_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1u))) ++q;
  }
  return Half::from_bits(pack(sign != 0, exp, q));
}

std::uint32_t ulp_distance(Half a, Half b) {
  auto key = [](Half h) -> long {
    const long mag = h.bits() & 0x7FFF;
    return h.sign() ? -mag : mag;
  };
  return static_cast<std::uint32_t>(std::labs(key(a) - key(b)));
}

std::string to_hex(Half h) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out(4, '0');
  for (int i = 0; i < 4; ++i) out[3 - i] = kDigits[(h.bits() >> (4 * i)) & 0xF];
  return out;
}

Half half_from_hex(std::string_view text) {
  if (text.size() != 4) throw InvalidArgument("binary16 hex must be 4 digits: '" + std::string(text) + "'");
  std::uint16_t bits = 0;
  for (char c : text) {
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else throw InvalidArgument("invalid hex digit in '" + std::string(text) + "'");
    bits = static_cast<std::uint16_t>((bits << 4) | v);
  }
  return Half::from_bits(bits);
}

}  // namespace consmax
