#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace privagg::crypto {

using Bytes = std::vector<std::uint8_t>;
using Seed16 = std::array<std::uint8_t, 16>;
using Key32 = std::array<std::uint8_t, 32>;

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

// AES-128-CTR keystream: key = seed, 16-byte IV = nonce (12 bytes) || 32-bit
// big-endian block counter starting at 0.
Bytes aes128_ctr_keystream(const Seed16& key,
                           std::span<const std::uint8_t, 12> nonce,
                           std::size_t n_bytes);

// AES-128-GCM. Output of seal: 12-byte nonce || ciphertext || 16-byte tag.
Bytes gcm_seal(const Seed16& key, std::span<const std::uint8_t, 12> nonce,
               std::span<const std::uint8_t> plaintext,
               std::span<const std::uint8_t> aad);

// Throws AuthError on tag mismatch.
Bytes gcm_open(const Seed16& key, std::span<const std::uint8_t> sealed,
               std::span<const std::uint8_t> aad);

struct AuthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// X25519 key agreement.
struct KaKeyPair {
  Key32 private_key;
  Key32 public_key;
};

// Deterministic keypair from 32 seed bytes (the seed is the raw private key).
KaKeyPair x25519_keypair(const Key32& private_seed);

Key32 x25519_shared(const Key32& private_key, const Key32& peer_public);

}  // namespace privagg::crypto
