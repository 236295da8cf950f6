#include "privagg/fieldvec.hpp"

#include <cstring>

namespace privagg::fieldvec {

MaskVector& MaskVector::operator+=(const MaskVector& other) {
  if (elems_.size() != other.elems_.size())
    throw std::invalid_argument("MaskVector length mismatch");
  for (std::size_t i = 0; i < elems_.size(); ++i) elems_[i] += other.elems_[i];
  return *this;
}

MaskVector& MaskVector::operator-=(const MaskVector& other) {
  if (elems_.size() != other.elems_.size())
    throw std::invalid_argument("MaskVector length mismatch");
  for (std::size_t i = 0; i < elems_.size(); ++i) elems_[i] -= other.elems_[i];
  return *this;
}

void EncodingParams::validate() const {
  if (vec_len == 0) throw std::invalid_argument("vec_len must be positive");
  if (value_bound == 0 || value_bound >= (1ULL << 63))
    throw std::invalid_argument("value_bound must be in [1, 2^63)");
}

MaskVector encode_counts(std::span<const std::int64_t> counts,
                         const EncodingParams& params) {
  params.validate();
  if (counts.size() != params.vec_len)
    throw std::invalid_argument("encode_counts: length mismatch");
  std::vector<std::uint64_t> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::int64_t v = counts[i];
    const std::uint64_t mag = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1
                                    : static_cast<std::uint64_t>(v);
    if (mag > params.value_bound)
      throw std::invalid_argument("encode_counts: magnitude exceeds bound");
    out[i] = static_cast<std::uint64_t>(v);
  }
  return MaskVector(std::move(out));
}

std::vector<std::int64_t> decode_sum(const MaskVector& sum,
                                     const EncodingParams& params,
                                     std::uint64_t n_contributors) {
  params.validate();
  if (sum.size() != params.vec_len)
    throw std::invalid_argument("decode_sum: length mismatch");
  if (n_contributors == 0)
    throw std::invalid_argument("decode_sum: need at least one contributor");
  // Reject configurations where the centered representative is ambiguous.
  if (params.value_bound > (1ULL << 63) / n_contributors)
    throw std::invalid_argument("decode_sum: n * value_bound >= 2^63");
  std::vector<std::int64_t> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    std::int64_t v;
    const std::uint64_t u = sum[i];
    std::memcpy(&v, &u, sizeof(v));  // centered representative
    out[i] = v;
  }
  return out;
}

MaskVector prg_expand(const crypto::Seed16& seed,
                      std::span<const std::uint8_t> domain_tag,
                      std::size_t vec_len) {
  const auto digest = crypto::sha256(domain_tag);
  std::span<const std::uint8_t, 12> nonce(digest.data(), 12);
  const crypto::Bytes stream =
      crypto::aes128_ctr_keystream(seed, nonce, vec_len * 8);
  std::vector<std::uint64_t> out(vec_len);
  for (std::size_t i = 0; i < vec_len; ++i) {
    std::uint64_t w = 0;
    for (int b = 7; b >= 0; --b) w = (w << 8) | stream[i * 8 + b];
    out[i] = w;
  }
  return MaskVector(std::move(out));
}

}  // namespace privagg::fieldvec
