#pragma once

// Little-endian primitive encoding shared by the checkpoint and code formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tdh/error.hpp"

namespace tdh::detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v, int nbytes = 8) {
  char buf[8];
  for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf, nbytes);
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_u64_le(out, v, 1); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_u64_le(out, v, 4); }
inline void write_f64(std::ostream& out, double v) { write_u64_le(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t read_u64_le(std::istream& in, int nbytes, const char* what) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), nbytes);
  if (in.gcount() != nbytes) throw IoError(std::string("truncated input while reading ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint8_t read_u8(std::istream& in, const char* what) {
  return static_cast<std::uint8_t>(read_u64_le(in, 1, what));
}
inline std::uint32_t read_u32(std::istream& in, const char* what) {
  return static_cast<std::uint32_t>(read_u64_le(in, 4, what));
}
inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_u64_le(in, 8, what));
}

inline void expect_magic(std::istream& in, const std::string& magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
    throw IoError("bad magic: expected \"" + magic + "\"");
  }
}

}  // namespace tdh::detail
