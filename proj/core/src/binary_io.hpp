#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian primitives shared by the checkpoint and soft-label formats.
namespace srst::binio {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(buf, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(buf, 4);
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void get_bytes(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error(std::string("truncated input while reading ") + what);
  }
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char buf[8];
  get_bytes(in, reinterpret_cast<char*>(buf), 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char buf[4];
  get_bytes(in, reinterpret_cast<char*>(buf), 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline double get_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(get_u64(in, what));
}

}  // namespace srst::binio
