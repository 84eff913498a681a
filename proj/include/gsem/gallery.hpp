#pragma once

// Generators for small test systems.

#include <cstdint>
#include <vector>

#include "gsem/csr.hpp"

namespace gsem::gallery {

inline CsrMatrixF64 identity(std::uint64_t n)
{
   std::vector<Triplet> t;
   for (std::uint64_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
   return csr_from_triplets(n, n, std::move(t));
}

// 5-point Laplacian on an n x n grid with Dirichlet boundary: 4 on the
// diagonal, -1 for each grid neighbour.
inline CsrMatrixF64 poisson2d(std::uint64_t n)
{
   std::vector<Triplet> t;
   auto id = [n](std::uint64_t i, std::uint64_t j) { return i * n + j; };
   for (std::uint64_t i = 0; i < n; ++i) {
      for (std::uint64_t j = 0; j < n; ++j) {
         const auto row = id(i, j);
         t.push_back({row, row, 4.0});
         if (i > 0) t.push_back({row, id(i - 1, j), -1.0});
         if (i + 1 < n) t.push_back({row, id(i + 1, j), -1.0});
         if (j > 0) t.push_back({row, id(i, j - 1), -1.0});
         if (j + 1 < n) t.push_back({row, id(i, j + 1), -1.0});
      }
   }
   return csr_from_triplets(n * n, n * n, std::move(t));
}

// -Laplace(u) + (wx, wy) . grad(u) on the unit square, n x n interior grid,
// first-order upwind convection (wx, wy >= 0). Scaled by h^2.
inline CsrMatrixF64 convection_diffusion(std::uint64_t n, double wx = 20.0, double wy = 10.0)
{
   const double h = 1.0 / static_cast<double>(n + 1);
   const double cx = wx * h, cy = wy * h;
   std::vector<Triplet> t;
   auto id = [n](std::uint64_t i, std::uint64_t j) { return i * n + j; };
   for (std::uint64_t i = 0; i < n; ++i) {
      for (std::uint64_t j = 0; j < n; ++j) {
         const auto row = id(i, j);
         t.push_back({row, row, 4.0 + cx + cy});
         if (i > 0) t.push_back({row, id(i - 1, j), -1.0 - cy});
         if (i + 1 < n) t.push_back({row, id(i + 1, j), -1.0});
         if (j > 0) t.push_back({row, id(i, j - 1), -1.0 - cx});
         if (j + 1 < n) t.push_back({row, id(i, j + 1), -1.0});
      }
   }
   return csr_from_triplets(n * n, n * n, std::move(t));
}

// Periodic 1-D Laplacian with diagonal 2 + 2^-20. The diagonal needs 21
// fraction bits, so the head-only GSE view (d = 1, 14 fraction bits) reads it
// as exactly 2 and the matrix becomes singular with the all-ones null vector,
// while head+tail1 already reproduces it exactly. With b = A * ones the
// head-only residual cannot move.
inline CsrMatrixF64 head_stall(std::uint64_t n = 64)
{
   const double diag = 2.0 + 0x1p-20;
   std::vector<Triplet> t;
   for (std::uint64_t i = 0; i < n; ++i) {
      t.push_back({i, i, diag});
      t.push_back({i, (i + n - 1) % n, -1.0});
      t.push_back({i, (i + 1) % n, -1.0});
   }
   return csr_from_triplets(n, n, std::move(t));
}

// b = A * ones, the default right-hand side.
inline std::vector<double> rhs_for_ones(const CsrMatrixF64& a)
{
   std::vector<double> b(a.rows, 0.0);
   for (std::uint64_t i = 0; i < a.rows; ++i) {
      for (auto j = a.row_ptr[i]; j < a.row_ptr[i + 1]; ++j) b[i] += a.values[j];
   }
   return b;
}

} // namespace gsem::gallery
