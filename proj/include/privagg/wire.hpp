#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "privagg/crypto.hpp"
#include "privagg/fieldvec.hpp"
#include "privagg/shamir.hpp"

namespace privagg::wire {

using RoundId = std::array<std::uint8_t, 16>;
using ClientId = std::uint32_t;

struct KeyAdvert {
  ClientId client = 0;
  crypto::Key32 ka_public{};
  bool operator==(const KeyAdvert&) const = default;
};

struct EncryptedShares {
  ClientId client = 0;
  struct Entry {
    ClientId neighbor = 0;
    crypto::Bytes ciphertext;  // 12-byte nonce || ct || 16-byte tag
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;
  bool operator==(const EncryptedShares&) const = default;
};

struct MaskedInput {
  ClientId client = 0;
  fieldvec::MaskVector vec;
  bool operator==(const MaskedInput&) const = default;
};

struct UnmaskRequest {
  std::vector<ClientId> dropped_set;
  std::vector<ClientId> survivor_set;
  bool operator==(const UnmaskRequest&) const = default;
};

enum class ShareKind : std::uint8_t { KaKey = 0, SelfSeed = 1 };

struct UnmaskResponse {
  ClientId client = 0;
  struct Entry {
    ClientId subject = 0;
    ShareKind kind = ShareKind::KaKey;
    shamir::Share share;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> entries;
  bool operator==(const UnmaskResponse&) const = default;
};

using Message = std::variant<KeyAdvert, EncryptedShares, MaskedInput,
                             UnmaskRequest, UnmaskResponse>;

// Frame: 4-byte little-endian length || 1 tag byte || round_id (16 bytes) ||
// body. The length covers everything after the length field.
crypto::Bytes serialize(const Message& msg, const RoundId& round_id);

struct Parsed {
  RoundId round_id{};
  Message msg;
};
Parsed parse(std::span<const std::uint8_t> frame);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace privagg::wire
