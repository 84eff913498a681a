#pragma once

// Group-shared-exponent floating point (GSE-SEM).
//
// A population of FP64 values shares a small table of exponents. Each value
// keeps its sign, the index of a table entry and a denormalized significand
// whose explicit leading one sits d = E - e bits below the top, where E is the
// table entry and e the true biased exponent. Table entries are stored as the
// biased exponent plus one so that the hidden bit of IEEE 754 becomes an
// explicit bit of the significand.
//
// The 64-bit SEM word is split into three independent streams (head: bits
// 63..48, tail1: bits 47..32, tail2: bits 31..0) so a consumer can raise the
// precision by reading more streams without keeping another copy of the data.
//
// Conversion is shift-and-mask only; excess low-order bits are truncated.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gsem/error.hpp"

namespace gsem {

using ExponentHistogram = std::map<std::uint16_t, std::uint64_t>;

inline constexpr std::uint64_t sign_mask_64 = 0x8000'0000'0000'0000ULL;
inline constexpr std::uint64_t significand_mask_63 = 0x7FFF'FFFF'FFFF'FFFFULL;
inline constexpr std::uint64_t fraction_mask_52 = 0x000F'FFFF'FFFF'FFFFULL;
inline constexpr unsigned max_table_size = 128;

enum class PrecisionLevel : std::uint8_t { HeadOnly = 1, HeadTail1 = 2, Full = 3 };

inline constexpr PrecisionLevel all_levels[] = {PrecisionLevel::HeadOnly, PrecisionLevel::HeadTail1,
                                                PrecisionLevel::Full};

// Significand-bearing bits visible at a precision level (including sign).
constexpr unsigned visible_bits(PrecisionLevel level)
{
   switch (level) {
   case PrecisionLevel::HeadOnly: return 16;
   case PrecisionLevel::HeadTail1: return 32;
   case PrecisionLevel::Full: return 64;
   }
   return 64;
}

constexpr std::uint64_t level_mask(PrecisionLevel level)
{
   switch (level) {
   case PrecisionLevel::HeadOnly: return 0xFFFF'0000'0000'0000ULL;
   case PrecisionLevel::HeadTail1: return 0xFFFF'FFFF'0000'0000ULL;
   case PrecisionLevel::Full: return ~0ULL;
   }
   return ~0ULL;
}

inline const char* to_string(PrecisionLevel level)
{
   switch (level) {
   case PrecisionLevel::HeadOnly: return "head";
   case PrecisionLevel::HeadTail1: return "head+tail1";
   case PrecisionLevel::Full: return "full";
   }
   return "?";
}

constexpr std::uint16_t biased_exponent(double x)
{
   return static_cast<std::uint16_t>((std::bit_cast<std::uint64_t>(x) >> 52) & 0x7FF);
}

// Table of shared exponents. entries() holds biased exponent + 1 values,
// ordered by selection rank; the position in that list is the exponent index.
class SharedExponentTable {
public:
   SharedExponentTable() = default;

   SharedExponentTable(std::vector<std::uint16_t> entries, unsigned k_max)
      : entries_(std::move(entries)), k_max_(k_max)
   {
      if (k_max_ == 0 || k_max_ > max_table_size || !std::has_single_bit(k_max_)) {
         throw codec_error("k_max must be a power of two in [1, 128], got " + std::to_string(k_max_));
      }
      if (entries_.empty()) throw codec_error("no representable values");
      if (entries_.size() > k_max_) throw codec_error("shared exponent table exceeds k_max");
      for (std::size_t i = 0; i < entries_.size(); ++i) {
         if (entries_[i] < 1 || entries_[i] > 2047) {
            throw codec_error("shared exponent entry out of range: " + std::to_string(entries_[i]));
         }
         for (std::size_t j = 0; j < i; ++j) {
            if (entries_[j] == entries_[i]) throw codec_error("duplicate shared exponent entry");
         }
      }
      ei_bits_ = static_cast<unsigned>(std::countr_zero(k_max_));
      max_entry_ = *std::max_element(entries_.begin(), entries_.end());
   }

   const std::vector<std::uint16_t>& entries() const noexcept { return entries_; }
   std::size_t size() const noexcept { return entries_.size(); }
   unsigned k_max() const noexcept { return k_max_; }
   unsigned ei_bits() const noexcept { return ei_bits_; }
   std::uint16_t max_entry() const noexcept { return max_entry_; }
   std::uint16_t operator[](std::size_t i) const { return entries_.at(i); }

   struct Choice {
      unsigned index;
      unsigned shift; // d = E - e, always >= 1
   };

   // Entry with the smallest positive distance above biased exponent e.
   Choice select(unsigned e) const
   {
      unsigned best = 0;
      unsigned best_shift = ~0U;
      for (unsigned i = 0; i < entries_.size(); ++i) {
         if (entries_[i] > e) {
            const unsigned d = entries_[i] - e;
            if (d < best_shift) {
               best_shift = d;
               best = i;
            }
         }
      }
      if (best_shift == ~0U) {
         throw codec_error("unrepresentable exponent " + std::to_string(e) + " for shared exponent table");
      }
      return {best, best_shift};
   }

   friend bool operator==(const SharedExponentTable&, const SharedExponentTable&) = default;

private:
   std::vector<std::uint16_t> entries_;
   unsigned k_max_ = 8;
   unsigned ei_bits_ = 3;
   std::uint16_t max_entry_ = 0;
};

namespace detail {

inline SharedExponentTable build_table_with_max(const ExponentHistogram& histogram, unsigned k_max,
                                                std::uint16_t max_exponent)
{
   if (histogram.empty()) throw codec_error("no representable values");
   if (k_max == 0 || k_max > max_table_size || !std::has_single_bit(k_max)) {
      throw codec_error("k_max must be a power of two in [1, 128], got " + std::to_string(k_max));
   }
   if (max_exponent < 1 || max_exponent > 2046) {
      throw codec_error("maximum exponent out of range: " + std::to_string(max_exponent));
   }
   std::vector<std::pair<std::uint16_t, std::uint64_t>> ranked;
   ranked.reserve(histogram.size());
   for (const auto& [e, count] : histogram) {
      if (e < 1 || e > 2046) throw codec_error("histogram exponent out of range: " + std::to_string(e));
      if (count == 0) throw codec_error("histogram count must be positive");
      ranked.emplace_back(e, count);
   }
   std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first > b.first;
   });
   if (ranked.size() > k_max) ranked.resize(k_max);

   std::vector<std::uint16_t> entries;
   entries.reserve(ranked.size());
   bool has_max = false;
   for (const auto& [e, count] : ranked) {
      entries.push_back(static_cast<std::uint16_t>(e + 1));
      has_max = has_max || e == max_exponent;
   }
   if (!has_max) {
      if (entries.size() < k_max) {
         entries.push_back(static_cast<std::uint16_t>(max_exponent + 1));
      } else {
         entries.back() = static_cast<std::uint16_t>(max_exponent + 1);
      }
   }
   return SharedExponentTable(std::move(entries), k_max);
}

} // namespace detail

// Selects the k_max most frequent exponents (ties toward the larger exponent)
// and guarantees that the largest exponent plus one is present, displacing the
// least frequent selection if necessary.
inline SharedExponentTable build_shared_table(const ExponentHistogram& histogram, unsigned k_max = 8)
{
   if (histogram.empty()) throw codec_error("no representable values");
   return detail::build_table_with_max(histogram, k_max, histogram.rbegin()->first);
}

// One value in SEM form. exp_index is kept outside the word for matrix
// elements (it travels in the column index or a side array).
struct Sem64 {
   std::uint64_t word = 0;
   std::uint8_t exp_index = 0;

   friend bool operator==(const Sem64&, const Sem64&) = default;
};

inline Sem64 encode_fp64(double x, const SharedExponentTable& table)
{
   const auto bits = std::bit_cast<std::uint64_t>(x);
   const auto sign = bits & sign_mask_64;
   const auto e = static_cast<unsigned>((bits >> 52) & 0x7FF);
   if (e == 0x7FF) throw codec_error("non-finite value");
   if (e == 0) return {sign, 0};

   const auto [index, d] = table.select(e);
   if (d > 63) return {sign, static_cast<std::uint8_t>(index)};

   const auto fraction = bits & fraction_mask_52;
   const auto aligned = d <= 11 ? fraction << (11 - d) : fraction >> (d - 11);
   const auto significand = (1ULL << (63 - d)) | aligned;
   return {sign | significand, static_cast<std::uint8_t>(index)};
}

// Rebuilds an FP64 value from a SEM word and its shared exponent entry.
// An all-zero significand, or an exponent that would fall to zero or below,
// yields a signed zero.
inline double decode_with_entry(std::uint64_t word, unsigned entry) noexcept
{
   const auto sign = word & sign_mask_64;
   const auto significand = word & significand_mask_63;
   if (significand == 0) return std::bit_cast<double>(sign);

   const auto pos = static_cast<unsigned>(std::bit_width(significand) - 1);
   const int exponent = static_cast<int>(entry) - static_cast<int>(63 - pos);
   if (exponent <= 0) return std::bit_cast<double>(sign);

   const auto below = significand & ((1ULL << pos) - 1);
   const auto fraction = pos >= 52 ? below >> (pos - 52) : below << (52 - pos);
   return std::bit_cast<double>(sign | (static_cast<std::uint64_t>(exponent) << 52) | fraction);
}

// Inverse of encode_fp64 for a word that may have its low segments zeroed.
inline double decode(std::uint64_t word, unsigned exp_index, const SharedExponentTable& table)
{
   if (exp_index >= table.size()) {
      throw codec_error("invalid exponent index " + std::to_string(exp_index));
   }
   return decode_with_entry(word, table.entries()[exp_index]);
}

inline double decode(std::uint64_t word, unsigned exp_index, const SharedExponentTable& table,
                     PrecisionLevel level)
{
   return decode(word & level_mask(level), exp_index, table);
}

// 16-bit variant with the exponent index inline: sign | index | significand.
// The significand field has 15 - ei_bits bits; the explicit one lands at bit
// 15 - ei_bits - d, values whose one would fall below bit 0 flush to zero.
inline std::uint16_t encode_head16_with_ei(double x, const SharedExponentTable& table)
{
   const auto bits = std::bit_cast<std::uint64_t>(x);
   const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000);
   const auto e = static_cast<unsigned>((bits >> 52) & 0x7FF);
   if (e == 0x7FF) throw codec_error("non-finite value");
   if (e == 0) return sign;

   const auto [index, d] = table.select(e);
   const unsigned field = 15 - table.ei_bits();
   if (d > field) return sign;

   const auto index_bits = static_cast<std::uint16_t>(index << field);
   const auto fraction = ((bits & fraction_mask_52) >> d) >> (37 + table.ei_bits());
   const auto significand = static_cast<std::uint16_t>(fraction | (1U << (field - d)));
   return static_cast<std::uint16_t>(sign | index_bits | significand);
}

inline double decode_head16_with_ei(std::uint16_t value, const SharedExponentTable& table)
{
   const unsigned field = 15 - table.ei_bits();
   const unsigned index = table.ei_bits() == 0 ? 0 : (value >> field) & ((1U << table.ei_bits()) - 1);
   const std::uint64_t significand = value & ((1U << field) - 1);
   // Re-place the significand directly under the sign bit of a 64-bit word.
   const std::uint64_t word = (static_cast<std::uint64_t>(value & 0x8000) << 48) | (significand << (63 - field));
   return decode(word, index, table);
}

// Segment streams of a sequence of SEM words.
struct SemSegments {
   std::vector<std::uint16_t> head;
   std::vector<std::uint16_t> tail1;
   std::vector<std::uint32_t> tail2;

   std::size_t size() const noexcept { return head.size(); }

   void push_back(std::uint64_t word)
   {
      head.push_back(static_cast<std::uint16_t>(word >> 48));
      tail1.push_back(static_cast<std::uint16_t>(word >> 32));
      tail2.push_back(static_cast<std::uint32_t>(word));
   }

   // Word at position i with segments beyond `level` zeroed. Unchecked.
   std::uint64_t word(std::size_t i, PrecisionLevel level) const noexcept
   {
      std::uint64_t w = static_cast<std::uint64_t>(head[i]) << 48;
      if (level >= PrecisionLevel::HeadTail1) w |= static_cast<std::uint64_t>(tail1[i]) << 32;
      if (level == PrecisionLevel::Full) w |= tail2[i];
      return w;
   }

   friend bool operator==(const SemSegments&, const SemSegments&) = default;
};

inline SemSegments segment(std::span<const std::uint64_t> words)
{
   SemSegments s;
   s.head.reserve(words.size());
   s.tail1.reserve(words.size());
   s.tail2.reserve(words.size());
   for (auto w : words) s.push_back(w);
   return s;
}

inline std::uint64_t assemble(const SemSegments& segments, std::size_t index, PrecisionLevel level)
{
   if (index >= segments.size()) {
      throw codec_error("segment index " + std::to_string(index) + " out of bounds");
   }
   return segments.word(index, level);
}

} // namespace gsem
