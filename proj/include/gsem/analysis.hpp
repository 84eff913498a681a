#pragma once

// Value statistics of a sparse matrix: Shannon entropy of the stored bit
// patterns (whole value, exponent field, mantissa field) and the share of
// non-zeros covered by the k most frequent exponents.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ranges>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsem/csr.hpp"
#include "gsem/error.hpp"
#include "gsem/fpcodec.hpp"

namespace gsem {

struct ExponentCensus {
   ExponentHistogram counts;             // normal, finite values only
   std::uint64_t zero_or_subnormal = 0;  // biased exponent 0
   std::uint64_t non_finite = 0;         // biased exponent 2047

   std::uint64_t normal_count() const
   {
      std::uint64_t n = 0;
      for (const auto& [e, c] : counts) n += c;
      return n;
   }
};

inline ExponentCensus exponent_histogram(std::span<const double> values)
{
   ExponentCensus census;
   for (double v : values) {
      const auto e = biased_exponent(v);
      if (e == 0) {
         ++census.zero_or_subnormal;
      } else if (e == 0x7FF) {
         ++census.non_finite;
      } else {
         ++census.counts[e];
      }
   }
   return census;
}

inline ExponentCensus exponent_histogram(const CsrMatrixF64& m) { return exponent_histogram(m.values); }

// -sum p log2 p over the given symbol counts. Counts are summed in sorted
// order so the result does not depend on hash iteration order.
inline double entropy_of_counts(std::vector<std::uint64_t> counts)
{
   std::uint64_t total = 0;
   for (auto c : counts) total += c;
   if (total == 0) throw error("entropy of an empty multiset");
   std::sort(counts.begin(), counts.end(), std::greater<>{});
   double h = 0.0;
   const auto n = static_cast<double>(total);
   for (auto c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n;
      h -= p * std::log2(p);
   }
   return h == 0.0 ? 0.0 : h;
}

template <std::ranges::input_range R>
double entropy(const R& symbols)
{
   std::unordered_map<std::ranges::range_value_t<R>, std::uint64_t> freq;
   for (const auto& s : symbols) ++freq[s];
   std::vector<std::uint64_t> counts;
   counts.reserve(freq.size());
   for (const auto& [s, c] : freq) counts.push_back(c);
   return entropy_of_counts(std::move(counts));
}

struct EntropyTriple {
   double value = 0;    // full 64-bit patterns
   double exponent = 0; // 11-bit exponent fields
   double mantissa = 0; // 52-bit fraction fields
};

inline EntropyTriple value_entropies(std::span<const double> values)
{
   std::vector<std::uint64_t> bits(values.size()), exps(values.size()), mants(values.size());
   for (std::size_t i = 0; i < values.size(); ++i) {
      const auto b = std::bit_cast<std::uint64_t>(values[i]);
      bits[i] = b;
      exps[i] = (b >> 52) & 0x7FF;
      mants[i] = b & fraction_mask_52;
   }
   return {entropy(bits), entropy(exps), entropy(mants)};
}

// Share of the histogram held by its k largest counts.
inline double topk_coverage(const ExponentHistogram& histogram, unsigned k)
{
   if (k < 1) throw error("top-k coverage needs k >= 1");
   if (histogram.empty()) throw error("top-k coverage of an empty histogram");
   std::vector<std::uint64_t> counts;
   counts.reserve(histogram.size());
   std::uint64_t total = 0;
   for (const auto& [e, c] : histogram) {
      counts.push_back(c);
      total += c;
   }
   std::sort(counts.begin(), counts.end(), std::greater<>{});
   if (k >= counts.size()) return 1.0;
   std::uint64_t covered = 0;
   for (unsigned i = 0; i < k; ++i) covered += counts[i];
   return static_cast<double>(covered) / static_cast<double>(total);
}

// Fraction of the population whose exponent is stored exactly in the table
// (shift d = 1, no denormalization loss).
inline double table_coverage(const ExponentHistogram& histogram, const SharedExponentTable& table)
{
   std::uint64_t total = 0, covered = 0;
   for (const auto& [e, c] : histogram) {
      total += c;
      if (std::find(table.entries().begin(), table.entries().end(), e + 1) != table.entries().end()) covered += c;
   }
   return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
}

inline const std::vector<unsigned>& default_coverage_ks()
{
   static const std::vector<unsigned> ks{1, 2, 4, 8, 16, 32, 64};
   return ks;
}

struct AnalysisReport {
   std::uint64_t rows = 0, cols = 0, nnz = 0;
   EntropyTriple entropy;
   ExponentCensus census;
   std::vector<std::pair<unsigned, double>> coverage;
   unsigned k_max = 8;
   SharedExponentTable recommended_table;
   double recommended_table_coverage = 0;
};

inline AnalysisReport analyze_report(const CsrMatrixF64& m, const std::vector<unsigned>& ks = default_coverage_ks(),
                                     unsigned k_max = 8)
{
   AnalysisReport r;
   r.rows = m.rows;
   r.cols = m.cols;
   r.nnz = m.nnz();
   r.entropy = value_entropies(m.values);
   r.census = exponent_histogram(m);
   for (unsigned k : ks) r.coverage.emplace_back(k, topk_coverage(r.census.counts, k));
   r.k_max = k_max;
   r.recommended_table = build_shared_table(r.census.counts, k_max);
   r.recommended_table_coverage = table_coverage(r.census.counts, r.recommended_table);
   return r;
}

} // namespace gsem
