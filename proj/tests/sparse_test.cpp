#include <gtest/gtest.h>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "gsem/gallery.hpp"
#include "gsem/gse_csr.hpp"
#include "gsem/gsem_io.hpp"
#include "gsem/matrix_market.hpp"

using namespace gsem;

namespace {

CsrMatrixF64 random_matrix(std::uint64_t rows, std::uint64_t cols, double density, std::uint64_t seed,
                           int exp_lo = -6, int exp_hi = 4)
{
   std::mt19937_64 rng(seed);
   std::uniform_real_distribution<double> u(0.0, 1.0);
   std::uniform_int_distribution<int> ex(exp_lo, exp_hi);
   std::vector<Triplet> t;
   for (std::uint64_t i = 0; i < rows; ++i) {
      for (std::uint64_t j = 0; j < cols; ++j) {
         if (u(rng) < density) t.push_back({i, j, (u(rng) < 0.5 ? -1 : 1) * std::ldexp(1.0 + u(rng), ex(rng))});
      }
   }
   return csr_from_triplets(rows, cols, std::move(t));
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b)
{
   if (a.size() != b.size()) return false;
   for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
   }
   return true;
}

} // namespace

TEST(Csr, FromTripletsSortsAndSumsDuplicates)
{
   const auto m = csr_from_triplets(3, 3, {{2, 0, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}, {2, 0, 4.0}, {1, 1, 5.0}});
   EXPECT_EQ(m.row_ptr, (std::vector<std::uint64_t>{0, 2, 3, 4}));
   EXPECT_EQ(m.col_idx, (std::vector<std::uint32_t>{0, 2, 1, 0}));
   EXPECT_EQ(m.values, (std::vector<double>{3.0, 2.0, 5.0, 5.0}));
   EXPECT_NO_THROW(m.validate());
}

TEST(Csr, EmptyRowsAndMatrix)
{
   const auto m = csr_from_triplets(4, 2, {{3, 1, 1.0}});
   EXPECT_EQ(m.row_ptr, (std::vector<std::uint64_t>{0, 0, 0, 0, 1}));
   const auto e = csr_from_triplets(0, 0, {});
   EXPECT_EQ(e.nnz(), 0u);
   EXPECT_NO_THROW(e.validate());
}

TEST(Csr, ValidateRejectsBrokenInvariants)
{
   auto m = csr_from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 3.0}});
   auto bad = m;
   bad.col_idx[1] = 0;
   EXPECT_THROW(bad.validate(), format_error);
   bad = m;
   bad.col_idx[2] = 2;
   EXPECT_THROW(bad.validate(), format_error);
   bad = m;
   bad.row_ptr.back() = 2;
   EXPECT_THROW(bad.validate(), format_error);
   bad = m;
   bad.values.pop_back();
   EXPECT_THROW(bad.validate(), format_error);
   EXPECT_THROW(csr_from_triplets(2, 2, {{2, 0, 1.0}}), format_error);
}

TEST(MatrixMarket, ReadsGeneralSymmetricAndPattern)
{
   std::istringstream general("%%MatrixMarket matrix coordinate real general\n% comment\n\n2 3 3\n1 1 1.5\n2 3 -2e-3\n1 2 4\n");
   const auto g = read_matrix_market(general);
   EXPECT_EQ(g.rows, 2u);
   EXPECT_EQ(g.cols, 3u);
   EXPECT_EQ(g.values, (std::vector<double>{1.5, 4.0, -2e-3}));

   std::istringstream sym("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2\n2 1 -1\n");
   const auto s = read_matrix_market(sym);
   EXPECT_EQ(s.nnz(), 3u);
   EXPECT_EQ(s.values, (std::vector<double>{2.0, -1.0, -1.0}));

   std::istringstream pat("%%MatrixMarket matrix coordinate pattern general\n2 2 2\n1 2\n2 1\n");
   const auto p = read_matrix_market(pat);
   EXPECT_EQ(p.values, (std::vector<double>{1.0, 1.0}));

   std::istringstream integer("%%MatrixMarket matrix coordinate integer general\n1 1 1\n1 1 7\n");
   EXPECT_EQ(read_matrix_market(integer).values, (std::vector<double>{7.0}));
}

TEST(MatrixMarket, RejectsMalformedInput)
{
   const char* cases[] = {
      "garbage\n1 1 1\n1 1 1\n",
      "%%MatrixMarket matrix array real general\n1 1\n1\n",
      "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
      "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n",
      "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n",
   };
   for (const char* text : cases) {
      std::istringstream in(text);
      EXPECT_THROW(read_matrix_market(in), format_error) << text;
   }
   EXPECT_THROW(read_matrix_market(std::string("/nonexistent/file.mtx")), error);
}

TEST(MatrixMarket, WriteReadRoundTripIsExact)
{
   const auto m = random_matrix(30, 40, 0.2, 3, -40, 40);
   std::stringstream buf;
   write_matrix_market(buf, m);
   const auto back = read_matrix_market(buf);
   EXPECT_EQ(back.row_ptr, m.row_ptr);
   EXPECT_EQ(back.col_idx, m.col_idx);
   EXPECT_TRUE(same_bits(back.values, m.values));
}

TEST(GseCsr, EmbedsExponentIndexInColumn)
{
   const auto m = random_matrix(50, 60, 0.1, 4);
   const auto g = convert_to_gse(m, 8);
   EXPECT_TRUE(g.ei_in_column);
   EXPECT_TRUE(g.exp_side.empty());
   EXPECT_EQ(g.table.ei_bits(), 3u);
   for (std::uint64_t j = 0; j < g.nnz(); ++j) {
      EXPECT_EQ(g.column(j), m.col_idx[j]);
      EXPECT_EQ(g.col_idx[j] >> 29, g.exp_index(j));
   }
   EXPECT_NO_THROW(g.validate());
}

TEST(GseCsr, FallsBackToSideArrayForWideMatrices)
{
   const std::uint64_t cols = 1ULL << 30;
   const auto m = csr_from_triplets(3, cols, {{0, 0, 1.0}, {1, cols - 1, 0.25}, {2, 12345, -3.0}});
   const auto g = convert_to_gse(m, 8);
   EXPECT_FALSE(g.ei_in_column);
   EXPECT_EQ(g.exp_side.size(), 3u);
   EXPECT_EQ(g.column(1), cols - 1);
   EXPECT_TRUE(same_bits(g.to_csr().values, m.values));

   const auto narrow = convert_to_gse(m, 2); // one index bit: 2^30 < 2^31
   EXPECT_TRUE(narrow.ei_in_column);
   EXPECT_TRUE(GseCsrMatrix::fits_in_column((1ULL << 29) - 1, 3));
   EXPECT_FALSE(GseCsrMatrix::fits_in_column(1ULL << 29, 3));
}

TEST(GseCsr, FullLevelReproducesNarrowRangeMatrix)
{
   for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto m = random_matrix(40, 40, 0.15, 100 + seed);
      const auto g = convert_to_gse(m, 8);
      const auto back = g.to_csr(PrecisionLevel::Full);
      EXPECT_EQ(back.row_ptr, m.row_ptr);
      EXPECT_EQ(back.col_idx, m.col_idx);
      EXPECT_TRUE(same_bits(back.values, m.values));
   }
}

TEST(GseCsr, ConversionRejectsNonFinite)
{
   const auto m = csr_from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, std::numeric_limits<double>::infinity()}});
   EXPECT_THROW(convert_to_gse(m), codec_error);
   const auto zeros = csr_from_triplets(2, 2, {{0, 0, 0.0}});
   EXPECT_THROW(convert_to_gse(zeros), codec_error);
}

TEST(GseCsr, SampledTableKeepsMaximumExponent)
{
   auto m = random_matrix(200, 200, 0.05, 5, -10, 0);
   // One large value in a single row that sampling is unlikely to hit.
   std::vector<Triplet> t;
   for (std::uint64_t i = 0; i < m.rows; ++i) {
      for (auto j = m.row_ptr[i]; j < m.row_ptr[i + 1]; ++j) t.push_back({i, m.col_idx[j], m.values[j]});
   }
   t.push_back({137, 3, 1e6});
   m = csr_from_triplets(200, 200, std::move(t));
   const auto table = build_shared_table_sampled(m, 16, 8, 9);
   EXPECT_EQ(table.max_entry() - 1, biased_exponent(1e6));
   const auto g = convert_to_gse(m, 8, Sampling{16, 9});
   EXPECT_EQ(g.table, table);
   for (std::uint64_t j = 0; j < g.nnz(); ++j) {
      EXPECT_LE(std::fabs(g.value(j, PrecisionLevel::Full)), std::fabs(m.values[j]));
   }
   EXPECT_EQ(build_shared_table_sampled(m, 1, 8, 1), build_shared_table(exponent_histogram(m).counts, 8));
   EXPECT_THROW(build_shared_table_sampled(m, 0), codec_error);
}

TEST(GsemIo, RoundTripPreservesEveryField)
{
   const auto g = convert_to_gse(random_matrix(60, 70, 0.1, 6, -30, 30), 4);
   const auto bytes = serialize_gsem(g);
   EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GSEM");
   EXPECT_EQ(bytes[4], 1);
   const auto back = deserialize_gsem(bytes);
   EXPECT_EQ(back, g);

   const auto wide = csr_from_triplets(2, 1ULL << 31, {{0, 5, 1.0}, {1, (1ULL << 31) - 1, 3.5}});
   const auto gw = convert_to_gse(wide, 8);
   ASSERT_FALSE(gw.ei_in_column);
   EXPECT_EQ(deserialize_gsem(serialize_gsem(gw)), gw);
}

TEST(GsemIo, RejectsCorruption)
{
   const auto g = convert_to_gse(random_matrix(20, 20, 0.2, 7), 8);
   const auto bytes = serialize_gsem(g);

   auto bad_magic = bytes;
   bad_magic[0] = 'X';
   try {
      deserialize_gsem(bad_magic);
      FAIL();
   } catch (const format_error& e) {
      EXPECT_STREQ(e.what(), "not a GSEM file");
   }

   std::mt19937_64 rng(8);
   for (int i = 0; i < 200; ++i) {
      auto flipped = bytes;
      const auto pos = 5 + rng() % (flipped.size() - 5);
      flipped[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      try {
         deserialize_gsem(flipped);
         FAIL() << "corruption at byte " << pos << " not detected";
      } catch (const format_error& e) {
         EXPECT_STREQ(e.what(), "GSEM checksum mismatch");
      }
   }

   auto truncated = bytes;
   truncated.resize(7);
   EXPECT_THROW(deserialize_gsem(truncated), format_error);
   EXPECT_THROW(deserialize_gsem({}), format_error);
   auto version = bytes;
   version[4] = 9;
   EXPECT_THROW(deserialize_gsem(version), format_error);
}

TEST(GsemIo, SaveAndLoadFile)
{
   const auto path = std::filesystem::temp_directory_path() / "gsem_sparse_test.gsem";
   const auto g = convert_to_gse(gallery::poisson2d(8), 8);
   save_gsem(g, path.string());
   EXPECT_EQ(load_gsem(path.string()), g);
   std::filesystem::remove(path);
   EXPECT_THROW(load_gsem(path.string()), error);
}
