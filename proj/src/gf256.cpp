#include "ncsim/gf256.hpp"

#include <stdexcept>

namespace ncsim::gf {

namespace {

constexpr std::array<uint8_t, 512> make_exp() {
  std::array<uint8_t, 512> exp{};
  int x = 1;
  for (int i = 0; i < 255; ++i) {
    exp[i] = static_cast<uint8_t>(x);
    x <<= 1;
    if (x & 0x100) x ^= 0x11d;
  }
  for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
  return exp;
}

constexpr std::array<uint8_t, 256> make_log() {
  std::array<uint8_t, 256> log{};
  const auto exp = make_exp();
  for (int i = 0; i < 255; ++i) log[exp[i]] = static_cast<uint8_t>(i);
  log[0] = 0;  // undefined, never reached through mul/div paths
  return log;
}

}  // namespace

const std::array<uint8_t, 512> kExp = make_exp();
const std::array<uint8_t, 256> kLog = make_log();

uint8_t inv(uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: inverse of zero");
  return kExp[255 - kLog[a]];
}

uint8_t div(uint8_t a, uint8_t b) {
  if (b == 0) throw std::domain_error("gf256: division by zero");
  if (a == 0) return 0;
  return kExp[kLog[a] + 255 - kLog[b]];
}

void mul_add(uint8_t* dst, const uint8_t* src, size_t n, uint8_t c) {
  if (c == 0) return;
  if (c == 1) {
    for (size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  const int lc = kLog[c];
  for (size_t i = 0; i < n; ++i) {
    const uint8_t s = src[i];
    if (s) dst[i] ^= kExp[lc + kLog[s]];
  }
}

void scale(uint8_t* dst, size_t n, uint8_t c) {
  if (c == 1) return;
  if (c == 0) {
    for (size_t i = 0; i < n; ++i) dst[i] = 0;
    return;
  }
  const int lc = kLog[c];
  for (size_t i = 0; i < n; ++i) {
    const uint8_t s = dst[i];
    dst[i] = s ? kExp[lc + kLog[s]] : 0;
  }
}

}  // namespace ncsim::gf
