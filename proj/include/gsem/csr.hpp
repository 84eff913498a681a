#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsem/error.hpp"

namespace gsem {

// Compressed sparse row matrix in double precision.
struct CsrMatrixF64 {
   std::uint64_t rows = 0;
   std::uint64_t cols = 0;
   std::vector<std::uint64_t> row_ptr{0};
   std::vector<std::uint32_t> col_idx;
   std::vector<double> values;

   std::uint64_t nnz() const noexcept { return values.size(); }

   // Throws format_error if the CSR invariants do not hold.
   void validate() const
   {
      if (cols > (1ULL << 32)) throw format_error("column count exceeds 32-bit index range");
      if (row_ptr.size() != rows + 1) throw format_error("row_ptr must have rows + 1 entries");
      if (row_ptr.front() != 0) throw format_error("row_ptr[0] must be 0");
      if (col_idx.size() != values.size()) throw format_error("col_idx and values differ in length");
      if (row_ptr.back() != values.size()) throw format_error("row_ptr[rows] must equal nnz");
      for (std::uint64_t i = 0; i < rows; ++i) {
         if (row_ptr[i] > row_ptr[i + 1]) throw format_error("row_ptr is not non-decreasing at row " + std::to_string(i));
         for (auto j = row_ptr[i]; j < row_ptr[i + 1]; ++j) {
            if (col_idx[j] >= cols) throw format_error("column index out of range in row " + std::to_string(i));
            if (j > row_ptr[i] && col_idx[j] <= col_idx[j - 1]) {
               throw format_error("column indices not strictly increasing in row " + std::to_string(i));
            }
         }
      }
   }

   friend bool operator==(const CsrMatrixF64&, const CsrMatrixF64&) = default;
};

struct Triplet {
   std::uint64_t row;
   std::uint64_t col;
   double value;
};

// Sorts triplets into CSR order and sums duplicates.
inline CsrMatrixF64 csr_from_triplets(std::uint64_t rows, std::uint64_t cols, std::vector<Triplet> entries)
{
   if (cols > (1ULL << 32)) throw format_error("column count exceeds 32-bit index range");
   for (const auto& t : entries) {
      if (t.row >= rows || t.col >= cols) throw format_error("triplet coordinate out of range");
   }
   std::vector<std::uint64_t> counts(rows + 1, 0);
   for (const auto& t : entries) ++counts[t.row + 1];
   for (std::uint64_t i = 0; i < rows; ++i) counts[i + 1] += counts[i];

   // Counting sort by row keeps the input order within a row, then sort columns.
   std::vector<Triplet> by_row(entries.size());
   {
      auto next = counts;
      for (const auto& t : entries) by_row[next[t.row]++] = t;
   }

   CsrMatrixF64 m;
   m.rows = rows;
   m.cols = cols;
   m.row_ptr.assign(rows + 1, 0);
   m.col_idx.reserve(entries.size());
   m.values.reserve(entries.size());
   for (std::uint64_t i = 0; i < rows; ++i) {
      auto first = by_row.begin() + static_cast<std::ptrdiff_t>(counts[i]);
      auto last = by_row.begin() + static_cast<std::ptrdiff_t>(counts[i + 1]);
      std::stable_sort(first, last, [](const Triplet& a, const Triplet& b) { return a.col < b.col; });
      for (auto it = first; it != last; ++it) {
         if (it != first && it->col == (it - 1)->col) {
            m.values.back() += it->value;
         } else {
            m.col_idx.push_back(static_cast<std::uint32_t>(it->col));
            m.values.push_back(it->value);
         }
      }
      m.row_ptr[i + 1] = m.values.size();
   }
   return m;
}

} // namespace gsem
