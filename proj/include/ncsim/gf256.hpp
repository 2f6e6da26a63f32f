#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace ncsim::gf {

// GF(2^8) generated by x^8 + x^4 + x^3 + x^2 + 1 (0x11d), primitive element 2.
// Log/antilog tables make multiply two lookups; addition is XOR.
extern const std::array<uint8_t, 512> kExp;
extern const std::array<uint8_t, 256> kLog;

inline uint8_t add(uint8_t a, uint8_t b) { return a ^ b; }
inline uint8_t sub(uint8_t a, uint8_t b) { return a ^ b; }

inline uint8_t mul(uint8_t a, uint8_t b) {
  if (a == 0 || b == 0) return 0;
  return kExp[kLog[a] + kLog[b]];
}

// Multiplicative inverse; a must be nonzero.
uint8_t inv(uint8_t a);

// a / b; b must be nonzero.
uint8_t div(uint8_t a, uint8_t b);

// dst[i] ^= c * src[i] for i in [0, n)
void mul_add(uint8_t* dst, const uint8_t* src, size_t n, uint8_t c);

// dst[i] *= c
void scale(uint8_t* dst, size_t n, uint8_t c);

}  // namespace ncsim::gf
