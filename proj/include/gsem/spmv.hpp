#pragma once

// Sparse matrix-vector products, all accumulating in FP64.
//
// Every operator walks a row's elements in stored (ascending column) order
// with a single running sum, and only distributes whole rows across threads,
// so the result is bitwise reproducible for any thread count.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gsem/csr.hpp"
#include "gsem/error.hpp"
#include "gsem/gse_csr.hpp"
#include "gsem/half.hpp"

namespace gsem {

// Applies GSE_THREADS (if set to a positive integer) as the worker cap.
inline void apply_thread_env()
{
#ifdef _OPENMP
   if (const char* env = std::getenv("GSE_THREADS")) {
      const long n = std::strtol(env, nullptr, 10);
      if (n > 0) omp_set_num_threads(static_cast<int>(n));
   }
#endif
}

namespace detail {

inline void check_dims(std::uint64_t rows, std::uint64_t cols, std::size_t x, std::size_t y)
{
   if (x != cols) throw dimension_error("x has length " + std::to_string(x) + ", expected " + std::to_string(cols));
   if (y != rows) throw dimension_error("y has length " + std::to_string(y) + ", expected " + std::to_string(rows));
}

template <PrecisionLevel Level, bool EmbeddedIndex>
void spmv_gse_kernel(const GseCsrMatrix& m, std::span<const double> x, std::span<double> y)
{
   const auto rows = static_cast<std::int64_t>(m.rows);
   const auto* row_ptr = m.row_ptr.data();
   const auto* col_idx = m.col_idx.data();
   const auto* side = m.exp_side.data();
   const auto* head = m.segments.head.data();
   const auto* tail1 = m.segments.tail1.data();
   const auto* tail2 = m.segments.tail2.data();
   const unsigned table_len = static_cast<unsigned>(m.table.size());
   const unsigned shift = m.column_shift();
   const std::uint32_t mask = m.column_mask();
   const bool has_index_bits = m.table.ei_bits() > 0;

   // Entries padded to the full index range; out-of-range indices are flagged.
   unsigned entries[max_table_size] = {};
   for (unsigned i = 0; i < table_len; ++i) entries[i] = m.table.entries()[i];

   int bad_index = 0;
#pragma omp parallel for schedule(static) reduction(| : bad_index)
   for (std::int64_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (auto j = row_ptr[i]; j < row_ptr[i + 1]; ++j) {
         std::uint32_t col;
         unsigned idx;
         if constexpr (EmbeddedIndex) {
            col = col_idx[j] & mask;
            idx = has_index_bits ? col_idx[j] >> shift : 0U;
         } else {
            col = col_idx[j];
            idx = side[j];
         }
         if (idx >= table_len) {
            bad_index = 1;
            continue;
         }
         std::uint64_t word = static_cast<std::uint64_t>(head[j]) << 48;
         if constexpr (Level != PrecisionLevel::HeadOnly) word |= static_cast<std::uint64_t>(tail1[j]) << 32;
         if constexpr (Level == PrecisionLevel::Full) word |= tail2[j];
         sum += decode_with_entry(word, entries[idx]) * x[col];
      }
      y[static_cast<std::size_t>(i)] = sum;
   }
   if (bad_index) throw codec_error("corrupt exponent index in matrix");
}

template <PrecisionLevel Level>
void spmv_gse_dispatch(const GseCsrMatrix& m, std::span<const double> x, std::span<double> y)
{
   if (m.ei_in_column) {
      spmv_gse_kernel<Level, true>(m, x, y);
   } else {
      spmv_gse_kernel<Level, false>(m, x, y);
   }
}

} // namespace detail

inline void spmv_fp64(const CsrMatrixF64& m, std::span<const double> x, std::span<double> y)
{
   detail::check_dims(m.rows, m.cols, x.size(), y.size());
   const auto rows = static_cast<std::int64_t>(m.rows);
   const auto* row_ptr = m.row_ptr.data();
   const auto* col_idx = m.col_idx.data();
   const auto* values = m.values.data();
#pragma omp parallel for schedule(static)
   for (std::int64_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (auto j = row_ptr[i]; j < row_ptr[i + 1]; ++j) sum += values[j] * x[col_idx[j]];
      y[static_cast<std::size_t>(i)] = sum;
   }
}

inline std::vector<double> spmv_fp64(const CsrMatrixF64& m, std::span<const double> x)
{
   std::vector<double> y(m.rows);
   spmv_fp64(m, x, y);
   return y;
}

inline void spmv_gse(const GseCsrMatrix& m, std::span<const double> x, std::span<double> y, PrecisionLevel level)
{
   detail::check_dims(m.rows, m.cols, x.size(), y.size());
   switch (level) {
   case PrecisionLevel::HeadOnly: detail::spmv_gse_dispatch<PrecisionLevel::HeadOnly>(m, x, y); break;
   case PrecisionLevel::HeadTail1: detail::spmv_gse_dispatch<PrecisionLevel::HeadTail1>(m, x, y); break;
   case PrecisionLevel::Full: detail::spmv_gse_dispatch<PrecisionLevel::Full>(m, x, y); break;
   }
}

inline std::vector<double> spmv_gse(const GseCsrMatrix& m, std::span<const double> x, PrecisionLevel level)
{
   std::vector<double> y(m.rows);
   spmv_gse(m, x, y, level);
   return y;
}

// CSR matrix with values held as FP16 or BF16 bit patterns.
struct HalfCsrMatrix {
   std::uint64_t rows = 0;
   std::uint64_t cols = 0;
   std::vector<std::uint64_t> row_ptr{0};
   std::vector<std::uint32_t> col_idx;
   std::vector<std::uint16_t> values;
   HalfFormat format = HalfFormat::FP16;
   std::uint64_t overflow_count = 0; // finite inputs stored as +-inf

   std::uint64_t nnz() const noexcept { return values.size(); }
};

inline HalfCsrMatrix to_half(const CsrMatrixF64& m, HalfFormat format)
{
   HalfCsrMatrix h;
   h.rows = m.rows;
   h.cols = m.cols;
   h.row_ptr = m.row_ptr;
   h.col_idx = m.col_idx;
   h.format = format;
   h.values.reserve(m.nnz());
   for (double v : m.values) {
      const auto bits = to_half_bits(v, format);
      if (std::isfinite(v) && std::isinf(from_half_bits(bits, format))) ++h.overflow_count;
      h.values.push_back(bits);
   }
   return h;
}

inline void spmv_half(const HalfCsrMatrix& m, std::span<const double> x, std::span<double> y)
{
   detail::check_dims(m.rows, m.cols, x.size(), y.size());
   const auto rows = static_cast<std::int64_t>(m.rows);
   const auto* row_ptr = m.row_ptr.data();
   const auto* col_idx = m.col_idx.data();
   const auto* values = m.values.data();
   const auto format = m.format;
#pragma omp parallel for schedule(static)
   for (std::int64_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (auto j = row_ptr[i]; j < row_ptr[i + 1]; ++j) sum += from_half_bits(values[j], format) * x[col_idx[j]];
      y[static_cast<std::size_t>(i)] = sum;
   }
}

inline std::vector<double> spmv_half(const HalfCsrMatrix& m, std::span<const double> x)
{
   std::vector<double> y(m.rows);
   spmv_half(m, x, y);
   return y;
}

struct MaxAbsError {
   double value = 0.0;      // +inf when any entry of the tested vector is non-finite
   std::uint64_t index = 0; // position of the maximum (or first non-finite entry)
   bool non_finite = false;
};

inline MaxAbsError max_abs_error(std::span<const double> test, std::span<const double> reference)
{
   if (test.size() != reference.size()) throw dimension_error("max_abs_error: vectors differ in length");
   MaxAbsError r;
   for (std::size_t i = 0; i < test.size(); ++i) {
      if (!std::isfinite(test[i]) || !std::isfinite(reference[i])) {
         return {std::numeric_limits<double>::infinity(), i, true};
      }
      const double e = std::fabs(test[i] - reference[i]);
      if (e > r.value) {
         r.value = e;
         r.index = i;
      }
   }
   return r;
}

// 2 * nnz floating point operations per product.
inline double spmv_gflops(std::uint64_t nnz, double seconds)
{
   return seconds > 0 ? 2.0 * static_cast<double>(nnz) / seconds * 1e-9 : 0.0;
}

} // namespace gsem
