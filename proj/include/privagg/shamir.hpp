#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "privagg/crypto.hpp"

namespace privagg::shamir {

// GF(256) with the AES reduction polynomial x^8 + x^4 + x^3 + x + 1.
namespace gf256 {
std::uint8_t mul(std::uint8_t a, std::uint8_t b);
std::uint8_t inv(std::uint8_t a);  // a != 0
}  // namespace gf256

// One share of a byte-string secret: a common evaluation index plus one
// GF(256) share byte per secret byte.
struct Share {
  std::uint8_t index = 0;  // evaluation point, 1..255
  crypto::Bytes payload;

  bool operator==(const Share&) const = default;

  // 1 index byte || payload bytes
  crypto::Bytes serialize() const;
  static Share deserialize(std::span<const std::uint8_t> data);
};

// Bytewise Shamir split: per secret byte, a uniformly random degree-(t-1)
// polynomial with constant term = secret byte, evaluated at indices 1..m.
std::vector<Share> split(std::span<const std::uint8_t> secret, unsigned t,
                         unsigned m, std::mt19937_64& rng);

// Lagrange interpolation at 0 per byte; inverse of split for any t-subset.
crypto::Bytes reconstruct(std::span<const Share> shares, unsigned t);

}  // namespace privagg::shamir
