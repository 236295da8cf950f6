#include "privagg/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cstring>
#include <memory>
#include <stdexcept>

namespace privagg::crypto {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
using Pkey = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
using PkeyCtx = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;

[[noreturn]] void fail(const char* what) {
  throw std::runtime_error(std::string("openssl: ") + what);
}

}  // namespace

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Bytes aes128_ctr_keystream(const Seed16& key,
                           std::span<const std::uint8_t, 12> nonce,
                           std::size_t n_bytes) {
  std::array<std::uint8_t, 16> iv{};
  std::memcpy(iv.data(), nonce.data(), 12);
  // counter bytes 12..15 start at zero

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) fail("ctx alloc");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(),
                         iv.data()) != 1)
    fail("ctr init");

  Bytes zeros(n_bytes, 0);
  Bytes out(n_bytes);
  int len = 0;
  if (n_bytes > 0 &&
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, zeros.data(),
                        static_cast<int>(n_bytes)) != 1)
    fail("ctr update");
  return out;
}

Bytes gcm_seal(const Seed16& key, std::span<const std::uint8_t, 12> nonce,
               std::span<const std::uint8_t> plaintext,
               std::span<const std::uint8_t> aad) {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) fail("ctx alloc");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(),
                         nonce.data()) != 1)
    fail("gcm init");

  int len = 0;
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    fail("gcm aad");

  Bytes out(12 + plaintext.size() + 16);
  std::memcpy(out.data(), nonce.data(), 12);
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.data() + 12, &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1)
    fail("gcm update");
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + 12 + plaintext.size(),
                          &len) != 1)
    fail("gcm final");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16,
                          out.data() + 12 + plaintext.size()) != 1)
    fail("gcm tag");
  return out;
}

Bytes gcm_open(const Seed16& key, std::span<const std::uint8_t> sealed,
               std::span<const std::uint8_t> aad) {
  if (sealed.size() < 12 + 16)
    throw AuthError("ciphertext too short");
  const std::uint8_t* nonce = sealed.data();
  const std::uint8_t* ct = sealed.data() + 12;
  const std::size_t ct_len = sealed.size() - 12 - 16;
  std::uint8_t tag[16];
  std::memcpy(tag, sealed.data() + 12 + ct_len, 16);

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) fail("ctx alloc");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(),
                         nonce) != 1)
    fail("gcm init");

  int len = 0;
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    fail("gcm aad");

  Bytes out(ct_len);
  if (ct_len > 0 &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, ct,
                        static_cast<int>(ct_len)) != 1)
    fail("gcm update");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag) != 1)
    fail("gcm set tag");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + ct_len, &len) != 1)
    throw AuthError("authentication failed");
  return out;
}

KaKeyPair x25519_keypair(const Key32& private_seed) {
  Pkey pkey(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr,
                                         private_seed.data(),
                                         private_seed.size()));
  if (!pkey) fail("x25519 key");
  KaKeyPair kp;
  kp.private_key = private_seed;
  std::size_t len = kp.public_key.size();
  if (EVP_PKEY_get_raw_public_key(pkey.get(), kp.public_key.data(), &len) != 1 ||
      len != 32)
    fail("x25519 pub");
  return kp;
}

Key32 x25519_shared(const Key32& private_key, const Key32& peer_public) {
  // Clients derive one shared secret per neighbor with the same private key;
  // caching the loaded key avoids repeated OpenSSL 3 fetch/alloc overhead.
  thread_local Key32 cached_priv{};
  thread_local Pkey cached_sk;
  if (!cached_sk || cached_priv != private_key) {
    cached_sk.reset(EVP_PKEY_new_raw_private_key(
        EVP_PKEY_X25519, nullptr, private_key.data(), private_key.size()));
    cached_priv = private_key;
  }
  EVP_PKEY* sk_raw = cached_sk.get();
  Pkey pk(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr,
                                      peer_public.data(), peer_public.size()));
  if (!sk_raw || !pk) fail("x25519 load");
  PkeyCtx ctx(EVP_PKEY_CTX_new(sk_raw, nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
      EVP_PKEY_derive_set_peer(ctx.get(), pk.get()) != 1)
    fail("x25519 derive init");
  Key32 out{};
  std::size_t len = out.size();
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) != 1 || len != 32)
    fail("x25519 derive");
  return out;
}

}  // namespace privagg::crypto
