#pragma once

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <string>

#include "streaklab/error.hpp"

namespace streaklab {

// Exact rational, always in lowest terms with a positive denominator.
// Per-sequence statistics are kept as Ratio end to end so that values like
// 2/3 never pick up rounding noise; aggregation lowers to double at the end.
class Ratio {
public:
  constexpr Ratio() = default;

  Ratio(std::int64_t num, std::int64_t den) {
    if (den == 0)
      throw Error(errc::bad_argument, "ratio denominator must be nonzero");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    num_ = g ? num / g : num;
    den_ = g ? den / g : den;
  }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  Ratio operator+(const Ratio& o) const { return combine(o, +1); }
  Ratio operator-(const Ratio& o) const { return combine(o, -1); }

  bool operator==(const Ratio& o) const = default;

  std::strong_ordering operator<=>(const Ratio& o) const {
    const __int128 lhs = static_cast<__int128>(num_) * o.den_;
    const __int128 rhs = static_cast<__int128>(o.num_) * den_;
    if (lhs < rhs) return std::strong_ordering::less;
    if (lhs > rhs) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  // "0", "1", "17/42", "-1/3"
  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

private:
  Ratio combine(const Ratio& o, int sign) const {
    const __int128 num =
        static_cast<__int128>(num_) * o.den_ + static_cast<__int128>(sign) * o.num_ * den_;
    const __int128 den = static_cast<__int128>(den_) * o.den_;
    return from_i128(num, den);
  }

  static Ratio from_i128(__int128 num, __int128 den) {
    const __int128 a = num < 0 ? -num : num;
    __int128 g = gcd_i128(a, den);
    if (g == 0) g = 1;
    num /= g;
    den /= g;
    constexpr __int128 lim = INT64_MAX;
    if (num > lim || num < -lim || den > lim)
      throw Error(errc::bad_argument, "ratio arithmetic overflow");
    Ratio r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
  }

  static __int128 gcd_i128(__int128 a, __int128 b) {
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

} // namespace streaklab
