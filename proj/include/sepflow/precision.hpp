#pragma once

// Variable-precision floating point for flows whose intermediate positions
// outgrow double (long alternating canonical schedules).

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <boost/multiprecision/mpfr.hpp>

namespace sepflow {

using HighFloat = boost::multiprecision::mpfr_float;

// Sets the default working precision of newly created HighFloat values for
// the lifetime of the guard.
class PrecisionScope {
 public:
  explicit PrecisionScope(unsigned bits) : saved_(HighFloat::default_precision()) {
    HighFloat::default_precision(digits10(bits));
  }
  ~PrecisionScope() { HighFloat::default_precision(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

  static unsigned digits10(unsigned bits) { return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1; }

 private:
  unsigned saved_;
};

// log2 of |x|, or 0 when x is zero or small.
inline double magnitude_log2(const HighFloat& x) {
  if (x == 0) return 0.0;
  const HighFloat a = abs(x);
  if (a < 1) return 0.0;
  return static_cast<double>(log2(a));
}

// Smallest double not below x.
inline double round_up(const HighFloat& x) {
  double r = static_cast<double>(x);
  if (HighFloat(r) < x) r = std::nextafter(r, HUGE_VAL);
  return r;
}

// Bits needed to carry values up to 2^log2_max with `guard` fractional bits.
inline unsigned bits_for(double log2_max, unsigned guard = 128) {
  return std::max(192u, static_cast<unsigned>(std::ceil(std::max(0.0, log2_max))) + guard);
}

}  // namespace sepflow
