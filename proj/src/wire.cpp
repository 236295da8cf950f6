#include "privagg/wire.hpp"

#include <cstring>

namespace privagg::wire {

namespace {

constexpr std::uint8_t kTagKeyAdvert = 1;
constexpr std::uint8_t kTagEncryptedShares = 2;
constexpr std::uint8_t kTagMaskedInput = 3;
constexpr std::uint8_t kTagUnmaskRequest = 4;
constexpr std::uint8_t kTagUnmaskResponse = 5;

void put_u32(crypto::Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_u64(crypto::Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_bytes(crypto::Bytes& out, std::span<const std::uint8_t> b) {
  out.insert(out.end(), b.begin(), b.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) throw ParseError("wire: truncated message");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

struct BodyWriter {
  crypto::Bytes& out;

  void operator()(const KeyAdvert& m) const {
    put_u32(out, m.client);
    put_bytes(out, m.ka_public);
  }
  void operator()(const EncryptedShares& m) const {
    put_u32(out, m.client);
    put_u32(out, static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& e : m.entries) {
      put_u32(out, e.neighbor);
      put_u32(out, static_cast<std::uint32_t>(e.ciphertext.size()));
      put_bytes(out, e.ciphertext);
    }
  }
  void operator()(const MaskedInput& m) const {
    put_u32(out, m.client);
    put_u32(out, static_cast<std::uint32_t>(m.vec.size()));
    for (std::size_t i = 0; i < m.vec.size(); ++i) put_u64(out, m.vec[i]);
  }
  void operator()(const UnmaskRequest& m) const {
    put_u32(out, static_cast<std::uint32_t>(m.dropped_set.size()));
    for (ClientId c : m.dropped_set) put_u32(out, c);
    put_u32(out, static_cast<std::uint32_t>(m.survivor_set.size()));
    for (ClientId c : m.survivor_set) put_u32(out, c);
  }
  void operator()(const UnmaskResponse& m) const {
    put_u32(out, m.client);
    put_u32(out, static_cast<std::uint32_t>(m.entries.size()));
    for (const auto& e : m.entries) {
      put_u32(out, e.subject);
      out.push_back(static_cast<std::uint8_t>(e.kind));
      const crypto::Bytes ser = e.share.serialize();
      put_u32(out, static_cast<std::uint32_t>(ser.size()));
      put_bytes(out, ser);
    }
  }
};

std::uint8_t tag_of(const Message& msg) {
  struct Tagger {
    std::uint8_t operator()(const KeyAdvert&) const { return kTagKeyAdvert; }
    std::uint8_t operator()(const EncryptedShares&) const {
      return kTagEncryptedShares;
    }
    std::uint8_t operator()(const MaskedInput&) const { return kTagMaskedInput; }
    std::uint8_t operator()(const UnmaskRequest&) const {
      return kTagUnmaskRequest;
    }
    std::uint8_t operator()(const UnmaskResponse&) const {
      return kTagUnmaskResponse;
    }
  };
  return std::visit(Tagger{}, msg);
}

}  // namespace

crypto::Bytes serialize(const Message& msg, const RoundId& round_id) {
  crypto::Bytes body;
  body.push_back(tag_of(msg));
  put_bytes(body, round_id);
  std::visit(BodyWriter{body}, msg);

  crypto::Bytes frame;
  frame.reserve(4 + body.size());
  put_u32(frame, static_cast<std::uint32_t>(body.size()));
  put_bytes(frame, body);
  return frame;
}

Parsed parse(std::span<const std::uint8_t> frame) {
  Reader r(frame);
  const std::uint32_t len = r.u32();
  if (frame.size() != 4 + std::size_t(len))
    throw ParseError("wire: frame length mismatch");
  const std::uint8_t tag = r.u8();

  Parsed p;
  auto rid = r.bytes(16);
  std::memcpy(p.round_id.data(), rid.data(), 16);

  switch (tag) {
    case kTagKeyAdvert: {
      KeyAdvert m;
      m.client = r.u32();
      auto pub = r.bytes(32);
      std::memcpy(m.ka_public.data(), pub.data(), 32);
      p.msg = m;
      break;
    }
    case kTagEncryptedShares: {
      EncryptedShares m;
      m.client = r.u32();
      const std::uint32_t n = r.u32();
      m.entries.resize(n);
      for (auto& e : m.entries) {
        e.neighbor = r.u32();
        const std::uint32_t ct_len = r.u32();
        auto ct = r.bytes(ct_len);
        e.ciphertext.assign(ct.begin(), ct.end());
      }
      p.msg = m;
      break;
    }
    case kTagMaskedInput: {
      MaskedInput m;
      m.client = r.u32();
      const std::uint32_t n = r.u32();
      std::vector<std::uint64_t> elems(n);
      for (auto& v : elems) v = r.u64();
      m.vec = fieldvec::MaskVector(std::move(elems));
      p.msg = std::move(m);
      break;
    }
    case kTagUnmaskRequest: {
      UnmaskRequest m;
      const std::uint32_t nd = r.u32();
      m.dropped_set.resize(nd);
      for (auto& c : m.dropped_set) c = r.u32();
      const std::uint32_t ns = r.u32();
      m.survivor_set.resize(ns);
      for (auto& c : m.survivor_set) c = r.u32();
      p.msg = std::move(m);
      break;
    }
    case kTagUnmaskResponse: {
      UnmaskResponse m;
      m.client = r.u32();
      const std::uint32_t n = r.u32();
      m.entries.resize(n);
      for (auto& e : m.entries) {
        e.subject = r.u32();
        const std::uint8_t kind = r.u8();
        if (kind > 1) throw ParseError("wire: bad share kind");
        e.kind = static_cast<ShareKind>(kind);
        const std::uint32_t share_len = r.u32();
        e.share = shamir::Share::deserialize(r.bytes(share_len));
      }
      p.msg = std::move(m);
      break;
    }
    default:
      throw ParseError("wire: unknown message tag");
  }
  if (!r.done()) throw ParseError("wire: trailing bytes");
  return p;
}

}  // namespace privagg::wire
