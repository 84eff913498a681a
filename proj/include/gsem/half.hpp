#pragma once

// Software IEEE binary16 (FP16) and bfloat16 (BF16) storage conversion.
// Narrowing from FP64 rounds to nearest, ties to even, in a single step;
// overflow produces infinity. Widening back to FP64 is exact.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace gsem {

enum class HalfFormat : std::uint8_t { FP16, BF16 };

inline const char* to_string(HalfFormat f) { return f == HalfFormat::FP16 ? "fp16" : "bf16"; }

struct HalfLayout {
   unsigned exponent_bits;
   unsigned mantissa_bits;

   constexpr int bias() const { return (1 << (exponent_bits - 1)) - 1; }
   constexpr std::uint32_t exponent_max() const { return (1U << exponent_bits) - 1; }
};

constexpr HalfLayout layout_of(HalfFormat f)
{
   return f == HalfFormat::FP16 ? HalfLayout{5, 10} : HalfLayout{8, 7};
}

inline std::uint16_t to_half_bits(double x, HalfFormat format)
{
   const auto L = layout_of(format);
   const auto bits = std::bit_cast<std::uint64_t>(x);
   const auto sign = static_cast<std::uint16_t>((bits >> 63) << 15);
   const auto e = static_cast<int>((bits >> 52) & 0x7FF);
   const auto f = bits & 0x000F'FFFF'FFFF'FFFFULL;
   const auto inf = static_cast<std::uint16_t>(sign | (L.exponent_max() << L.mantissa_bits));

   if (e == 0x7FF) {
      if (f == 0) return inf;
      return static_cast<std::uint16_t>(inf | (1U << (L.mantissa_bits - 1)));
   }
   if (e == 0) return sign; // FP64 subnormals are far below the smallest target subnormal

   int target_exp = e - 1023 + L.bias();
   const auto significand = (1ULL << 52) | f;
   unsigned shift = 52 - L.mantissa_bits;
   if (target_exp < 1) {
      const unsigned extra = static_cast<unsigned>(1 - target_exp);
      if (shift + extra >= 54) return sign;
      shift += extra;
      target_exp = 0;
   }
   auto q = significand >> shift;
   const auto rem = significand & ((1ULL << shift) - 1);
   const auto half = 1ULL << (shift - 1);
   if (rem > half || (rem == half && (q & 1))) ++q;

   if (target_exp == 0) {
      // Subnormal result; a carry into bit mantissa_bits yields the smallest normal.
      return static_cast<std::uint16_t>(sign | q);
   }
   if (q >> (L.mantissa_bits + 1)) {
      q >>= 1;
      ++target_exp;
   }
   if (target_exp >= static_cast<int>(L.exponent_max())) return inf;
   const auto mantissa = q & ((1ULL << L.mantissa_bits) - 1);
   return static_cast<std::uint16_t>(sign | (static_cast<std::uint32_t>(target_exp) << L.mantissa_bits) | mantissa);
}

inline double from_half_bits(std::uint16_t h, HalfFormat format)
{
   const auto L = layout_of(format);
   const bool negative = (h >> 15) != 0;
   const auto exp = (h >> L.mantissa_bits) & L.exponent_max();
   const auto mant = h & ((1U << L.mantissa_bits) - 1);
   double v;
   if (exp == L.exponent_max()) {
      v = mant == 0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
   } else if (exp == 0) {
      v = std::ldexp(static_cast<double>(mant), 1 - L.bias() - static_cast<int>(L.mantissa_bits));
   } else {
      v = std::ldexp(static_cast<double>(mant | (1U << L.mantissa_bits)),
                     static_cast<int>(exp) - L.bias() - static_cast<int>(L.mantissa_bits));
   }
   return negative ? -v : v;
}

} // namespace gsem
