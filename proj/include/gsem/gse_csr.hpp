#pragma once

// CSR matrix whose values are stored as segmented GSE-SEM words.
//
// The exponent index of each element is packed into the top ei_bits of its
// 32-bit column index whenever the column count leaves room for it
// (cols < 2^(32 - ei_bits)); otherwise a byte-per-element side array holds
// the indices.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gsem/analysis.hpp"
#include "gsem/csr.hpp"
#include "gsem/error.hpp"
#include "gsem/fpcodec.hpp"

namespace gsem {

struct Sampling {
   std::uint64_t block_rows = 1;
   std::uint64_t seed = 42;
};

// Exponent histogram from one uniformly drawn row per block of block_rows
// rows. The maximum-exponent rule still uses a full scan of the matrix so
// every value stays representable.
inline SharedExponentTable build_shared_table_sampled(const CsrMatrixF64& m, std::uint64_t block_rows,
                                                      unsigned k_max = 8, std::uint64_t seed = 42)
{
   if (block_rows < 1) throw codec_error("block_rows must be >= 1");
   const auto full = exponent_histogram(m);
   if (full.counts.empty()) throw codec_error("no representable values");
   const auto max_exponent = full.counts.rbegin()->first;

   std::mt19937_64 rng(seed);
   ExponentHistogram sampled;
   for (std::uint64_t first = 0; first < m.rows; first += block_rows) {
      const auto last = std::min(m.rows, first + block_rows);
      std::uniform_int_distribution<std::uint64_t> pick(first, last - 1);
      const auto row = pick(rng);
      for (auto j = m.row_ptr[row]; j < m.row_ptr[row + 1]; ++j) {
         const auto e = biased_exponent(m.values[j]);
         if (e != 0 && e != 0x7FF) ++sampled[e];
      }
   }
   if (sampled.empty()) return SharedExponentTable({static_cast<std::uint16_t>(max_exponent + 1)}, k_max);
   return detail::build_table_with_max(sampled, k_max, max_exponent);
}

class GseCsrMatrix {
public:
   std::uint64_t rows = 0;
   std::uint64_t cols = 0;
   std::vector<std::uint64_t> row_ptr{0};
   std::vector<std::uint32_t> col_idx; // embedded exponent index when ei_in_column
   std::vector<std::uint8_t> exp_side; // exponent indices when !ei_in_column
   SemSegments segments;
   SharedExponentTable table;
   bool ei_in_column = true;

   std::uint64_t nnz() const noexcept { return segments.size(); }

   unsigned column_shift() const noexcept { return 32 - table.ei_bits(); }

   std::uint32_t column_mask() const noexcept
   {
      return ei_in_column && table.ei_bits() > 0 ? static_cast<std::uint32_t>((1ULL << column_shift()) - 1)
                                                 : 0xFFFF'FFFFU;
   }

   std::uint32_t column(std::uint64_t j) const noexcept { return col_idx[j] & column_mask(); }

   unsigned exp_index(std::uint64_t j) const noexcept
   {
      if (!ei_in_column) return exp_side[j];
      return table.ei_bits() == 0 ? 0U : col_idx[j] >> column_shift();
   }

   double value(std::uint64_t j, PrecisionLevel level) const
   {
      return decode(segments.word(j, level), exp_index(j), table);
   }

   static bool fits_in_column(std::uint64_t cols, unsigned ei_bits) noexcept
   {
      return cols < (1ULL << (32 - ei_bits));
   }

   // Structural checks shared by the converter and the loader.
   void validate() const
   {
      if (cols > (1ULL << 32)) throw format_error("column count exceeds 32-bit index range");
      if (row_ptr.size() != rows + 1 || row_ptr.front() != 0 || row_ptr.back() != nnz()) {
         throw format_error("malformed row pointer array");
      }
      if (col_idx.size() != nnz() || segments.tail1.size() != nnz() || segments.tail2.size() != nnz()) {
         throw format_error("element arrays differ in length");
      }
      if (ei_in_column != fits_in_column(cols, table.ei_bits())) {
         throw format_error("exponent index placement inconsistent with column count");
      }
      if (!ei_in_column && exp_side.size() != nnz()) throw format_error("exponent side array has wrong length");
      if (ei_in_column && !exp_side.empty()) throw format_error("unexpected exponent side array");
      for (std::uint64_t i = 0; i < rows; ++i) {
         if (row_ptr[i] > row_ptr[i + 1]) throw format_error("row_ptr is not non-decreasing");
         for (auto j = row_ptr[i]; j < row_ptr[i + 1]; ++j) {
            if (column(j) >= cols) throw format_error("column index out of range in row " + std::to_string(i));
            if (j > row_ptr[i] && column(j) <= column(j - 1)) {
               throw format_error("column indices not strictly increasing in row " + std::to_string(i));
            }
            if (exp_index(j) >= table.size()) throw format_error("invalid exponent index");
         }
      }
   }

   // Decodes every element at the given level back into an FP64 CSR matrix.
   CsrMatrixF64 to_csr(PrecisionLevel level = PrecisionLevel::Full) const
   {
      CsrMatrixF64 m;
      m.rows = rows;
      m.cols = cols;
      m.row_ptr = row_ptr;
      m.col_idx.resize(nnz());
      m.values.resize(nnz());
      for (std::uint64_t j = 0; j < nnz(); ++j) {
         m.col_idx[j] = column(j);
         m.values[j] = value(j, level);
      }
      return m;
   }

   friend bool operator==(const GseCsrMatrix&, const GseCsrMatrix&) = default;
};

inline GseCsrMatrix convert_to_gse(const CsrMatrixF64& m, unsigned k_max = 8,
                                   std::optional<Sampling> sampling = std::nullopt)
{
   for (std::uint64_t i = 0; i < m.rows; ++i) {
      for (auto j = m.row_ptr[i]; j < m.row_ptr[i + 1]; ++j) {
         if (!std::isfinite(m.values[j])) {
            throw codec_error("non-finite value at row " + std::to_string(i) + ", col " + std::to_string(m.col_idx[j]));
         }
      }
   }
   GseCsrMatrix g;
   g.table = sampling ? build_shared_table_sampled(m, sampling->block_rows, k_max, sampling->seed)
                      : build_shared_table(exponent_histogram(m).counts, k_max);
   g.rows = m.rows;
   g.cols = m.cols;
   g.row_ptr = m.row_ptr;
   g.ei_in_column = GseCsrMatrix::fits_in_column(m.cols, g.table.ei_bits());

   const auto n = m.nnz();
   g.col_idx.resize(n);
   if (!g.ei_in_column) g.exp_side.resize(n);
   g.segments.head.reserve(n);
   g.segments.tail1.reserve(n);
   g.segments.tail2.reserve(n);
   const unsigned shift = g.column_shift();
   for (std::uint64_t j = 0; j < n; ++j) {
      const auto sem = encode_fp64(m.values[j], g.table);
      g.segments.push_back(sem.word);
      if (g.ei_in_column) {
         g.col_idx[j] = g.table.ei_bits() == 0 ? m.col_idx[j]
                                               : (static_cast<std::uint32_t>(sem.exp_index) << shift) | m.col_idx[j];
      } else {
         g.col_idx[j] = m.col_idx[j];
         g.exp_side[j] = sem.exp_index;
      }
   }
   return g;
}

} // namespace gsem
