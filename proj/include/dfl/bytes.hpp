#pragma once

#include <bit>
#include <cstdint>
#include <cstring>

namespace dfl::bytes {

// Little-endian scalar packing for the wire protocol and the hypothesis
// container. Explicit byte shuffling keeps the formats identical across
// hosts regardless of native endianness.

inline void store_u16(uint8_t* p, uint16_t v) {
  p[0] = static_cast<uint8_t>(v);
  p[1] = static_cast<uint8_t>(v >> 8);
}

inline void store_u32(uint8_t* p, uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

inline void store_u64(uint8_t* p, uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<uint8_t>(v >> (8 * i));
}

inline void store_f64(uint8_t* p, double v) {
  store_u64(p, std::bit_cast<uint64_t>(v));
}

inline uint16_t load_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (uint16_t{p[1]} << 8));
}

inline uint32_t load_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline uint64_t load_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline double load_f64(const uint8_t* p) {
  return std::bit_cast<double>(load_u64(p));
}

}  // namespace dfl::bytes
