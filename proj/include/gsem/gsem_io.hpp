#pragma once

// GSEM binary container for GseCsrMatrix.
//
//   "GSEM" | version u8 (=1)
//   rows u64 | cols u64 | nnz u64 | k_max u8 | ei_bits u8 | ei_in_column u8 | table_len u8
//   table u16 x table_len
//   row_ptr u64 x (rows + 1)
//   col_idx u32 x nnz
//   exponent indices u8 x nnz          (only when ei_in_column == 0)
//   head u16 x nnz | tail1 u16 x nnz | tail2 u32 x nnz
//   crc32 u32 over every byte between the version byte and the checksum
//
// All integers little-endian.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <zlib.h>

#include "gsem/error.hpp"
#include "gsem/gse_csr.hpp"

namespace gsem {

inline constexpr std::array<char, 4> gsem_magic{'G', 'S', 'E', 'M'};
inline constexpr std::uint8_t gsem_version = 1;

namespace detail {

class ByteWriter {
public:
   template <class T>
   void put(T value)
   {
      for (std::size_t i = 0; i < sizeof(T); ++i) {
         bytes_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
      }
   }

   template <class T>
   void put_all(const std::vector<T>& values)
   {
      bytes_.reserve(bytes_.size() + values.size() * sizeof(T));
      for (auto v : values) put(v);
   }

   std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

private:
   std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
   ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

   std::size_t remaining() const noexcept { return size_ - pos_; }

   void require(std::uint64_t count, std::uint64_t width) const
   {
      if (width != 0 && count > remaining() / width) throw format_error("truncated GSEM file");
   }

   template <class T>
   T get()
   {
      require(1, sizeof(T));
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
      pos_ += sizeof(T);
      return static_cast<T>(v);
   }

   template <class T>
   std::vector<T> get_all(std::uint64_t count)
   {
      require(count, sizeof(T));
      std::vector<T> out(count);
      for (auto& v : out) v = get<T>();
      return out;
   }

private:
   const std::uint8_t* data_;
   std::size_t size_;
   std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size)
{
   uLong crc = ::crc32(0L, Z_NULL, 0);
   // zlib takes uInt lengths; feed large buffers in chunks.
   while (size > 0) {
      const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1U << 30));
      crc = ::crc32(crc, data, chunk);
      data += chunk;
      size -= chunk;
   }
   return static_cast<std::uint32_t>(crc);
}

} // namespace detail

inline std::vector<std::uint8_t> serialize_gsem(const GseCsrMatrix& m)
{
   detail::ByteWriter w;
   for (char c : gsem_magic) w.put(static_cast<std::uint8_t>(c));
   w.put(gsem_version);
   w.put<std::uint64_t>(m.rows);
   w.put<std::uint64_t>(m.cols);
   w.put<std::uint64_t>(m.nnz());
   w.put<std::uint8_t>(static_cast<std::uint8_t>(m.table.k_max()));
   w.put<std::uint8_t>(static_cast<std::uint8_t>(m.table.ei_bits()));
   w.put<std::uint8_t>(m.ei_in_column ? 1 : 0);
   w.put<std::uint8_t>(static_cast<std::uint8_t>(m.table.size()));
   w.put_all(m.table.entries());
   w.put_all(m.row_ptr);
   w.put_all(m.col_idx);
   if (!m.ei_in_column) w.put_all(m.exp_side);
   w.put_all(m.segments.head);
   w.put_all(m.segments.tail1);
   w.put_all(m.segments.tail2);
   auto& bytes = w.bytes();
   const auto preamble = gsem_magic.size() + 1;
   w.put(detail::crc32_of(bytes.data() + preamble, bytes.size() - preamble));
   return std::move(bytes);
}

inline GseCsrMatrix deserialize_gsem(const std::vector<std::uint8_t>& bytes)
{
   const auto preamble = gsem_magic.size() + 1;
   if (bytes.size() < gsem_magic.size() || std::memcmp(bytes.data(), gsem_magic.data(), gsem_magic.size()) != 0) {
      throw format_error("not a GSEM file");
   }
   if (bytes.size() < preamble + 4) throw format_error("truncated GSEM file");
   if (bytes[gsem_magic.size()] != gsem_version) {
      throw format_error("unsupported GSEM version " + std::to_string(bytes[gsem_magic.size()]));
   }

   const auto stored_crc = detail::ByteReader(bytes.data() + bytes.size() - 4, 4).get<std::uint32_t>();
   if (stored_crc != detail::crc32_of(bytes.data() + preamble, bytes.size() - preamble - 4)) {
      throw format_error("GSEM checksum mismatch");
   }

   detail::ByteReader r(bytes.data() + preamble, bytes.size() - preamble - 4);
   GseCsrMatrix m;
   m.rows = r.get<std::uint64_t>();
   m.cols = r.get<std::uint64_t>();
   const auto nnz = r.get<std::uint64_t>();
   const unsigned k_max = r.get<std::uint8_t>();
   const unsigned ei_bits = r.get<std::uint8_t>();
   const auto ei_flag = r.get<std::uint8_t>();
   const unsigned table_len = r.get<std::uint8_t>();
   if (ei_flag > 1) throw format_error("invalid exponent index placement flag");
   m.ei_in_column = ei_flag == 1;
   auto entries = r.get_all<std::uint16_t>(table_len);
   if (m.rows == ~0ULL) throw format_error("invalid row count");
   m.row_ptr = r.get_all<std::uint64_t>(m.rows + 1);
   m.col_idx = r.get_all<std::uint32_t>(nnz);
   if (!m.ei_in_column) m.exp_side = r.get_all<std::uint8_t>(nnz);
   m.segments.head = r.get_all<std::uint16_t>(nnz);
   m.segments.tail1 = r.get_all<std::uint16_t>(nnz);
   m.segments.tail2 = r.get_all<std::uint32_t>(nnz);
   if (r.remaining() != 0) throw format_error("trailing bytes in GSEM file");

   try {
      m.table = SharedExponentTable(std::move(entries), k_max);
   } catch (const codec_error& e) {
      throw format_error(std::string("invalid shared exponent table: ") + e.what());
   }
   if (m.table.ei_bits() != ei_bits) throw format_error("ei_bits inconsistent with k_max");
   m.validate();
   return m;
}

inline void save_gsem(const GseCsrMatrix& m, const std::string& path)
{
   const auto bytes = serialize_gsem(m);
   std::ofstream out(path, std::ios::binary);
   if (!out) throw error("cannot open '" + path + "' for writing");
   out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
   if (!out) throw error("failed writing '" + path + "'");
}

inline GseCsrMatrix load_gsem(const std::string& path)
{
   std::ifstream in(path, std::ios::binary);
   if (!in) throw error("cannot open '" + path + "'");
   std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
   return deserialize_gsem(bytes);
}

} // namespace gsem
