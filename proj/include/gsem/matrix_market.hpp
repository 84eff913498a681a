#pragma once

// Matrix Market coordinate reader/writer.
//
// Supported: coordinate format, field real/integer/pattern, symmetry
// general/symmetric. Symmetric input is expanded to full storage, pattern
// entries become 1.0 and duplicate coordinates are summed.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gsem/csr.hpp"
#include "gsem/error.hpp"

namespace gsem {

namespace detail {

inline std::string lowercase(std::string s)
{
   std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
   return s;
}

inline std::vector<std::string> split_ws(const std::string& line)
{
   std::vector<std::string> out;
   std::istringstream in(line);
   for (std::string tok; in >> tok;) out.push_back(tok);
   return out;
}

inline std::uint64_t parse_index(const std::string& tok, std::size_t line_no)
{
   std::uint64_t v = 0;
   auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
   if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw format_error("line " + std::to_string(line_no) + ": invalid integer '" + tok + "'");
   }
   return v;
}

inline double parse_real(const std::string& tok, std::size_t line_no)
{
   // from_chars for double is missing on older standard libraries.
   char* end = nullptr;
   const double v = std::strtod(tok.c_str(), &end);
   if (end != tok.c_str() + tok.size()) {
      throw format_error("line " + std::to_string(line_no) + ": invalid number '" + tok + "'");
   }
   return v;
}

} // namespace detail

inline CsrMatrixF64 read_matrix_market(std::istream& in)
{
   std::string line;
   std::size_t line_no = 0;
   if (!std::getline(in, line)) throw format_error("line 1: empty input, missing Matrix Market header");
   ++line_no;

   const auto header = detail::split_ws(detail::lowercase(line));
   if (header.size() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix") {
      throw format_error("line 1: malformed Matrix Market header");
   }
   if (header[2] != "coordinate") throw format_error("line 1: only coordinate format is supported");
   const std::string& field = header[3];
   if (field == "complex") throw format_error("line 1: complex matrices are not supported");
   if (field != "real" && field != "integer" && field != "pattern") {
      throw format_error("line 1: unsupported field '" + field + "'");
   }
   const std::string& symmetry = header[4];
   if (symmetry != "general" && symmetry != "symmetric") {
      throw format_error("line 1: unsupported symmetry '" + symmetry + "'");
   }
   const bool pattern = field == "pattern";
   const bool symmetric = symmetry == "symmetric";

   std::vector<std::string> size_tokens;
   while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '%') continue;
      size_tokens = detail::split_ws(line);
      if (!size_tokens.empty()) break;
   }
   if (size_tokens.size() != 3) throw format_error("line " + std::to_string(line_no) + ": malformed size line");
   const auto rows = detail::parse_index(size_tokens[0], line_no);
   const auto cols = detail::parse_index(size_tokens[1], line_no);
   const auto declared = detail::parse_index(size_tokens[2], line_no);
   if (cols > (1ULL << 32)) throw format_error("line " + std::to_string(line_no) + ": too many columns");
   if (symmetric && rows != cols) throw format_error("line " + std::to_string(line_no) + ": symmetric matrix must be square");

   std::vector<Triplet> entries;
   entries.reserve(symmetric ? 2 * declared : declared);
   std::uint64_t seen = 0;
   while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '%') continue;
      const auto tok = detail::split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != (pattern ? 2u : 3u)) {
         throw format_error("line " + std::to_string(line_no) + ": expected " + (pattern ? "2" : "3") + " fields");
      }
      const auto i = detail::parse_index(tok[0], line_no);
      const auto j = detail::parse_index(tok[1], line_no);
      if (i < 1 || i > rows || j < 1 || j > cols) {
         throw format_error("line " + std::to_string(line_no) + ": coordinate out of range");
      }
      const double v = pattern ? 1.0 : detail::parse_real(tok[2], line_no);
      entries.push_back({i - 1, j - 1, v});
      if (symmetric && i != j) entries.push_back({j - 1, i - 1, v});
      ++seen;
   }
   if (seen != declared) {
      throw format_error("line " + std::to_string(line_no) + ": expected " + std::to_string(declared) +
                         " entries, found " + std::to_string(seen));
   }
   return csr_from_triplets(rows, cols, std::move(entries));
}

inline CsrMatrixF64 read_matrix_market(const std::string& path)
{
   std::ifstream in(path);
   if (!in) throw error("cannot open '" + path + "'");
   return read_matrix_market(in);
}

// Writes general coordinate format with round-trip exact values.
inline void write_matrix_market(std::ostream& out, const CsrMatrixF64& m)
{
   out << "%%MatrixMarket matrix coordinate real general\n";
   out << m.rows << ' ' << m.cols << ' ' << m.nnz() << '\n';
   out << std::setprecision(std::numeric_limits<double>::max_digits10);
   for (std::uint64_t i = 0; i < m.rows; ++i) {
      for (auto j = m.row_ptr[i]; j < m.row_ptr[i + 1]; ++j) {
         out << (i + 1) << ' ' << (m.col_idx[j] + 1ULL) << ' ' << m.values[j] << '\n';
      }
   }
}

inline void write_matrix_market(const std::string& path, const CsrMatrixF64& m)
{
   std::ofstream out(path);
   if (!out) throw error("cannot open '" + path + "' for writing");
   write_matrix_market(out, m);
   if (!out) throw error("failed writing '" + path + "'");
}

} // namespace gsem
