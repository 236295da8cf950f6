#include "privagg/shamir.hpp"

#include <array>
#include <stdexcept>

namespace privagg::shamir {

namespace gf256 {
namespace {

struct Tables {
  std::array<std::uint8_t, 256> log{};
  std::array<std::uint8_t, 512> exp{};
  Tables() {
    // generator 3 over the AES polynomial
    std::uint16_t x = 1;
    for (int i = 0; i < 255; ++i) {
      exp[i] = static_cast<std::uint8_t>(x);
      log[x] = static_cast<std::uint8_t>(i);
      x ^= x << 1;  // multiply by 3
      if (x & 0x100) x ^= 0x11B;
    }
    for (int i = 255; i < 512; ++i) exp[i] = exp[i - 255];
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  const auto& t = tables();
  return t.exp[t.log[a] + t.log[b]];
}

std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: inverse of zero");
  const auto& t = tables();
  return t.exp[255 - t.log[a]];
}

}  // namespace gf256

crypto::Bytes Share::serialize() const {
  crypto::Bytes out;
  out.reserve(1 + payload.size());
  out.push_back(index);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Share Share::deserialize(std::span<const std::uint8_t> data) {
  if (data.empty()) throw std::invalid_argument("Share: empty buffer");
  Share s;
  s.index = data[0];
  if (s.index == 0) throw std::invalid_argument("Share: index 0");
  s.payload.assign(data.begin() + 1, data.end());
  return s;
}

std::vector<Share> split(std::span<const std::uint8_t> secret, unsigned t,
                         unsigned m, std::mt19937_64& rng) {
  if (secret.empty()) throw std::invalid_argument("split: empty secret");
  if (t < 1 || t > m) throw std::invalid_argument("split: need 1 <= t <= m");
  if (m > 255) throw std::invalid_argument("split: m > 255");

  std::vector<Share> shares(m);
  for (unsigned j = 0; j < m; ++j) {
    shares[j].index = static_cast<std::uint8_t>(j + 1);
    shares[j].payload.resize(secret.size());
  }

  std::uniform_int_distribution<int> byte_dist(0, 255);
  std::vector<std::uint8_t> coeffs(t);
  for (std::size_t b = 0; b < secret.size(); ++b) {
    coeffs[0] = secret[b];
    for (unsigned d = 1; d < t; ++d)
      coeffs[d] = static_cast<std::uint8_t>(byte_dist(rng));
    for (unsigned j = 0; j < m; ++j) {
      const std::uint8_t x = shares[j].index;
      std::uint8_t acc = 0;  // Horner
      for (unsigned d = t; d-- > 0;) acc = gf256::mul(acc, x) ^ coeffs[d];
      shares[j].payload[b] = acc;
    }
  }
  return shares;
}

crypto::Bytes reconstruct(std::span<const Share> shares, unsigned t) {
  if (t < 1) throw std::invalid_argument("reconstruct: t < 1");
  if (shares.size() < t)
    throw std::invalid_argument("reconstruct: fewer than t shares");
  const std::size_t len = shares[0].payload.size();
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (shares[i].payload.size() != len)
      throw std::invalid_argument("reconstruct: payload length mismatch");
    for (std::size_t j = i + 1; j < shares.size(); ++j)
      if (shares[i].index == shares[j].index)
        throw std::invalid_argument("reconstruct: duplicate share index");
  }

  // Lagrange basis at 0 over the first t shares.
  std::vector<std::uint8_t> lambda(t);
  for (unsigned i = 0; i < t; ++i) {
    std::uint8_t num = 1, den = 1;
    for (unsigned j = 0; j < t; ++j) {
      if (j == i) continue;
      num = gf256::mul(num, shares[j].index);
      den = gf256::mul(den,
                       static_cast<std::uint8_t>(shares[i].index ^
                                                 shares[j].index));
    }
    lambda[i] = gf256::mul(num, gf256::inv(den));
  }

  crypto::Bytes secret(len, 0);
  for (std::size_t b = 0; b < len; ++b) {
    std::uint8_t acc = 0;
    for (unsigned i = 0; i < t; ++i)
      acc ^= gf256::mul(lambda[i], shares[i].payload[b]);
    secret[b] = acc;
  }
  return secret;
}

}  // namespace privagg::shamir
