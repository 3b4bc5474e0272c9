#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "dynfv/error.hpp"

// Little-endian binary readers/writers shared by the GMM1, FVE1 and CBK1
// file formats.

namespace dynfv::binio {

inline void write_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f32(std::ostream& os, float v) {
  write_u32(os, std::bit_cast<uint32_t>(v));
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<uint64_t>(v));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

[[noreturn]] inline void fail_truncated(const std::string& what) {
  raise(ErrorCode::format, "truncated input while reading " + what);
}

inline uint32_t read_u32(std::istream& is, const char* what = "u32") {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) fail_truncated(what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t read_u64(std::istream& is, const char* what = "u64") {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) fail_truncated(what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is, const char* what = "f32") {
  return std::bit_cast<float>(read_u32(is, what));
}

inline double read_f64(std::istream& is, const char* what = "f64") {
  return std::bit_cast<double>(read_u64(is, what));
}

inline std::string read_string(std::istream& is, const char* what = "string") {
  const uint32_t n = read_u32(is, what);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) fail_truncated(what);
  return s;
}

inline void expect_magic(std::istream& is, const char* magic,
                         const std::string& format_name) {
  char got[4];
  if (!is.read(got, 4)) fail_truncated(format_name + " magic");
  for (int i = 0; i < 4; ++i) {
    if (got[i] != magic[i]) {
      raise(ErrorCode::format,
            "bad magic: expected " + format_name + " (" + magic + ")");
    }
  }
}

}  // namespace dynfv::binio
