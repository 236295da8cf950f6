#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "privagg/crypto.hpp"

namespace privagg::fieldvec {

// Fixed-length vector over the additive group Z_{2^64}. All arithmetic is
// element-wise with natural wrap-around.
class MaskVector {
 public:
  MaskVector() = default;
  explicit MaskVector(std::size_t len) : elems_(len, 0) {}
  explicit MaskVector(std::vector<std::uint64_t> elems)
      : elems_(std::move(elems)) {}

  std::size_t size() const { return elems_.size(); }
  std::uint64_t operator[](std::size_t i) const { return elems_[i]; }
  std::uint64_t& operator[](std::size_t i) { return elems_[i]; }
  const std::vector<std::uint64_t>& elems() const { return elems_; }

  MaskVector& operator+=(const MaskVector& other);
  MaskVector& operator-=(const MaskVector& other);
  friend MaskVector operator+(MaskVector a, const MaskVector& b) {
    a += b;
    return a;
  }
  friend MaskVector operator-(MaskVector a, const MaskVector& b) {
    a -= b;
    return a;
  }
  bool operator==(const MaskVector&) const = default;

 private:
  std::vector<std::uint64_t> elems_;
};

struct EncodingParams {
  std::size_t vec_len = 0;
  // Max absolute value any decoded sum coordinate may take, per contributor.
  std::uint64_t value_bound = 0;

  void validate() const;
};

// Centered (two's-complement style) encoding of signed counts into the group.
MaskVector encode_counts(std::span<const std::int64_t> counts,
                         const EncodingParams& params);

// Inverse of the group-summed encoding; exact as long as the true aggregate
// fits in [-n*V, n*V] with n*V < 2^63.
std::vector<std::int64_t> decode_sum(const MaskVector& sum,
                                     const EncodingParams& params,
                                     std::uint64_t n_contributors);

// Deterministic expansion of a 16-byte seed into a mask vector: AES-128-CTR
// keystream under key=seed, nonce = first 12 bytes of SHA-256(domain_tag),
// chunked into little-endian 64-bit words.
MaskVector prg_expand(const crypto::Seed16& seed,
                      std::span<const std::uint8_t> domain_tag,
                      std::size_t vec_len);

}  // namespace privagg::fieldvec
