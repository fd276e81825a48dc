#pragma once

// Reference computations used by the tests. They share no code with the
// library: binary16 rounding goes through MPFR with an 11-bit significand and
// the binary16 exponent range, softmax through long double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <mpfr.h>

namespace oracle {

// Bit pattern of a double that is exactly representable in binary16 (or +/-inf).
inline std::uint16_t encode_half(double x) {
  std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  x = std::fabs(x);
  if (std::isinf(x)) return sign | 0x7C00;
  if (x == 0.0) return sign;
  int e = 0;
  const double m = std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
  if (e - 1 < -14) {                   // subnormal: x = frac * 2^-24
    return sign | static_cast<std::uint16_t>(std::ldexp(x, 24));
  }
  const auto frac = static_cast<std::uint16_t>(std::ldexp(m, 11) - 1024.0);
  return sign | static_cast<std::uint16_t>((e - 1 + 15) << 10) | frac;
}

inline double decode_half(std::uint16_t h) {
  const int exp = (h >> 10) & 0x1F;
  const int frac = h & 0x3FF;
  double v;
  if (exp == 0) v = std::ldexp(frac, -24);
  else if (exp == 31) v = frac ? NAN : INFINITY;
  else v = std::ldexp(1024 + frac, exp - 25);
  return (h & 0x8000) ? -v : v;
}

// Round a high-precision value to binary16: RNE at 11 bits for normals, at the
// fixed 2^-24 quantum for subnormals, overflow to inf.
inline std::uint16_t round_to_half(mpfr_srcptr hi) {
  if (mpfr_zero_p(hi)) return mpfr_signbit(hi) ? 0x8000 : 0;
  if (mpfr_inf_p(hi)) return mpfr_signbit(hi) ? 0xFC00 : 0x7C00;
  const mpfr_exp_t e = mpfr_get_exp(hi);  // |hi| in [2^(e-1), 2^e)
  const long bits = e - 1 >= -14 ? 11 : static_cast<long>(e) + 24;
  const bool neg = mpfr_signbit(hi) != 0;
  double r;
  if (bits >= 1) {
    mpfr_t h;
    mpfr_init2(h, mpfr_get_prec(hi));
    mpfr_set(h, hi, MPFR_RNDN);
    mpfr_prec_round(h, bits, MPFR_RNDN);
    r = mpfr_get_d(h, MPFR_RNDN);
    mpfr_clear(h);
  } else if (bits == 0) {  // |hi| in [2^-25, 2^-24): above the midpoint goes up
    mpfr_t a;
    mpfr_init2(a, mpfr_get_prec(hi));
    mpfr_abs(a, hi, MPFR_RNDN);
    r = mpfr_cmp_d(a, std::ldexp(1.0, -25)) > 0 ? std::ldexp(1.0, -24) : 0.0;
    if (neg) r = -r;
    mpfr_clear(a);
  } else {
    r = neg ? -0.0 : 0.0;
  }
  if (std::fabs(r) > 65504.0) r = neg ? -INFINITY : INFINITY;
  return encode_half(r);
}

inline std::uint16_t half_of_double(double x) {
  mpfr_t v;
  mpfr_init2(v, 53);
  mpfr_set_d(v, x, MPFR_RNDN);
  const auto bits = round_to_half(v);
  mpfr_clear(v);
  return bits;
}

// binary16(exp(a)), with `a` exact in double.
inline std::uint16_t half_exp(double a) {
  mpfr_t v;
  mpfr_init2(v, 200);
  mpfr_set_d(v, a, MPFR_RNDN);
  mpfr_exp(v, v, MPFR_RNDN);
  const auto bits = round_to_half(v);
  mpfr_clear(v);
  return bits;
}

// binary16(a * b) for binary16 operands.
inline std::uint16_t half_product(std::uint16_t a, std::uint16_t b) {
  mpfr_t v;
  mpfr_init2(v, 64);
  mpfr_set_d(v, decode_half(a), MPFR_RNDN);
  mpfr_mul_d(v, v, decode_half(b), MPFR_RNDN);  // exact: 22-bit product
  const auto bits = round_to_half(v);
  mpfr_clear(v);
  return bits;
}

// c * exp(a) to ~60 significant digits, returned as double.
inline double exp_scaled(double a, double c) {
  mpfr_t v;
  mpfr_init2(v, 200);
  mpfr_set_d(v, a, MPFR_RNDN);
  mpfr_exp(v, v, MPFR_RNDN);
  mpfr_mul_d(v, v, c, MPFR_RNDN);
  const double r = mpfr_get_d(v, MPFR_RNDN);
  mpfr_clear(v);
  return r;
}

// Two-pass softmax in long double.
inline std::vector<double> softmax(const std::vector<double>& s) {
  long double m = s[0];
  for (double x : s) m = std::max<long double>(m, x);
  std::vector<long double> e(s.size());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) sum += (e[i] = std::exp(static_cast<long double>(s[i]) - m));
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
  return out;
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::fabs(a[i]), std::fabs(b[i]));
    if (denom > 0.0) worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
