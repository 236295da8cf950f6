#include "privagg/secsum.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace privagg::secsum {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void put_u32(crypto::Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

crypto::Bytes derivation_input(const char* label, const RoundId& round_id,
                               ClientId a, ClientId b,
                               const crypto::Key32* shared = nullptr) {
  crypto::Bytes buf;
  buf.insert(buf.end(), label, label + std::strlen(label));
  buf.insert(buf.end(), round_id.begin(), round_id.end());
  put_u32(buf, a);
  put_u32(buf, b);
  if (shared) buf.insert(buf.end(), shared->begin(), shared->end());
  return buf;
}

crypto::Seed16 first16(const std::array<std::uint8_t, 32>& digest) {
  crypto::Seed16 out{};
  std::copy_n(digest.begin(), 16, out.begin());
  return out;
}

unsigned default_threshold(std::size_t degree) {
  if (degree == 0) return 1;
  return static_cast<unsigned>((2 * degree + 2) / 3);  // ceil(2*deg/3)
}

}  // namespace

namespace derive {

crypto::Seed16 mask_seed(const crypto::Key32& shared, const RoundId& round_id,
                         ClientId a, ClientId b) {
  const ClientId lo = std::min(a, b), hi = std::max(a, b);
  return first16(crypto::sha256(derivation_input("mask", round_id, lo, hi,
                                                 &shared)));
}

crypto::Seed16 enc_key(const crypto::Key32& shared, const RoundId& round_id,
                       ClientId sender, ClientId receiver) {
  return first16(crypto::sha256(derivation_input("enc", round_id, sender,
                                                 receiver, &shared)));
}

std::array<std::uint8_t, 12> enc_nonce(const RoundId& round_id,
                                       ClientId sender, ClientId receiver) {
  const auto digest =
      crypto::sha256(derivation_input("nonce", round_id, sender, receiver));
  std::array<std::uint8_t, 12> out{};
  std::copy_n(digest.begin(), 12, out.begin());
  return out;
}

crypto::Bytes self_mask_tag(const RoundId& round_id, ClientId i) {
  return derivation_input("self", round_id, i, i);
}

crypto::Bytes pair_mask_tag(const RoundId& round_id, ClientId a, ClientId b) {
  const ClientId lo = std::min(a, b), hi = std::max(a, b);
  return derivation_input("pair", round_id, lo, hi);
}

}  // namespace derive

void RoundConfig::validate() const {
  if (n == 0) throw RoundFailure("config: n must be positive");
  if (vec_len == 0) throw RoundFailure("config: vec_len must be positive");
  if (n > 1) {
    if (k == 0 || k >= n) throw RoundFailure("config: need 1 <= k < n");
    if (k > 255) throw RoundFailure("config: k exceeds share index space");
  }
  if (t > 255) throw RoundFailure("config: t exceeds share index space");
  if (theta < 0 || theta >= 1) throw RoundFailure("config: theta not in [0,1)");
}

NeighborGraph NeighborGraph::build(std::uint32_t n, std::uint32_t k,
                                   std::uint64_t graph_seed) {
  if (n == 0) throw RoundFailure("graph: n must be positive");
  if (n > 1 && k >= n) throw RoundFailure("graph: k >= n");

  NeighborGraph g;
  g.adjacency_.assign(n, {});
  if (n == 1) return g;

  std::mt19937_64 rng(graph_seed);
  std::vector<std::set<ClientId>> adj(n);
  std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
  for (ClientId i = 0; i < n; ++i) {
    std::set<ClientId> chosen;
    while (chosen.size() < k) {
      const ClientId j = pick(rng);
      if (j != i) chosen.insert(j);
    }
    for (ClientId j : chosen) {
      adj[i].insert(j);
      adj[j].insert(i);
    }
  }
  for (ClientId i = 0; i < n; ++i)
    g.adjacency_[i].assign(adj[i].begin(), adj[i].end());
  return g;
}

Client::Client(ClientId id, const RoundConfig& config, std::uint64_t rng_seed)
    : id_(id), config_(&config), rng_(rng_seed) {}

wire::KeyAdvert Client::advertise() {
  if (phase_ != Phase::Initial)
    throw ProtocolViolation("advertise called out of phase");
  crypto::Key32 seed{};
  for (auto& b : seed) b = static_cast<std::uint8_t>(rng_());
  ka_ = crypto::x25519_keypair(seed);
  phase_ = Phase::KeysSent;
  return wire::KeyAdvert{id_, ka_.public_key};
}

wire::EncryptedShares Client::distribute_shares(
    std::span<const wire::KeyAdvert> neighbor_adverts) {
  if (phase_ != Phase::KeysSent)
    throw ProtocolViolation("distribute_shares called out of phase");

  std::vector<ClientId> neighbors;
  std::unordered_map<ClientId, crypto::Key32> pubs;
  for (const auto& adv : neighbor_adverts) {
    if (adv.client == id_)
      throw ProtocolViolation("advert for self in neighbor set");
    neighbors.push_back(adv.client);
    pubs[adv.client] = adv.ka_public;
  }
  std::sort(neighbors.begin(), neighbors.end());
  if (std::adjacent_find(neighbors.begin(), neighbors.end()) !=
      neighbors.end())
    throw ProtocolViolation("duplicate neighbor advert");

  const std::size_t deg = neighbors.size();
  threshold_ = config_->t > 0 ? config_->t : default_threshold(deg);
  if (deg > 0 && threshold_ > deg)
    throw RoundFailure("degree below reconstruction threshold");

  for (auto& b : self_seed_) b = static_cast<std::uint8_t>(rng_());

  wire::EncryptedShares out;
  out.client = id_;
  mask_neighbors_ = neighbors;

  if (deg == 0) {
    // Isolated client: keep a degree-0 self share so the server's survivor
    // recovery path works uniformly.
    shamir::Share own;
    own.index = 1;
    own.payload.assign(self_seed_.begin(), self_seed_.end());
    held_seed_shares_[id_] = std::move(own);
    phase_ = Phase::SharesSent;
    return out;
  }

  const auto ka_shares =
      shamir::split(ka_.private_key, threshold_, static_cast<unsigned>(deg),
                    rng_);
  const auto seed_shares =
      shamir::split(self_seed_, threshold_, static_cast<unsigned>(deg), rng_);

  for (std::size_t idx = 0; idx < deg; ++idx) {
    const ClientId j = neighbors[idx];
    const crypto::Key32 shared = crypto::x25519_shared(ka_.private_key,
                                                       pubs[j]);
    shared_secrets_[j] = shared;
    pairwise_seeds_[j] = derive::mask_seed(shared, config_->round_id, id_, j);

    crypto::Bytes plaintext = ka_shares[idx].serialize();
    const crypto::Bytes seed_ser = seed_shares[idx].serialize();
    plaintext.insert(plaintext.end(), seed_ser.begin(), seed_ser.end());

    const crypto::Seed16 key =
        derive::enc_key(shared, config_->round_id, id_, j);
    const auto nonce = derive::enc_nonce(config_->round_id, id_, j);
    const crypto::Bytes aad = derivation_input("shares", config_->round_id,
                                               id_, j);
    out.entries.push_back(
        {j, crypto::gcm_seal(key, nonce, plaintext, aad)});
  }
  phase_ = Phase::SharesSent;
  return out;
}

void Client::receive_shares(ClientId from,
                            std::span<const std::uint8_t> ciphertext) {
  if (phase_ == Phase::Dropped) throw ProtocolViolation("client dropped");
  const auto it = pairwise_seeds_.find(from);
  if (it == pairwise_seeds_.end())
    throw ProtocolViolation("shares from non-neighbor");
  // Directional key for (from -> me).
  const crypto::Key32& shared = shared_secrets_.at(from);
  const crypto::Seed16 key =
      derive::enc_key(shared, config_->round_id, from, id_);
  const crypto::Bytes aad = derivation_input("shares", config_->round_id,
                                             from, id_);
  const crypto::Bytes plain = crypto::gcm_open(key, ciphertext, aad);
  if (plain.size() != 33 + 17)
    throw ProtocolViolation("malformed share plaintext");
  held_ka_shares_[from] =
      shamir::Share::deserialize({plain.data(), 33});
  held_seed_shares_[from] =
      shamir::Share::deserialize({plain.data() + 33, 17});
}

wire::MaskedInput Client::mask_input(const fieldvec::MaskVector& input) {
  if (phase_ != Phase::SharesSent)
    throw ProtocolViolation("mask_input called out of phase");
  if (input.size() != config_->vec_len)
    throw ProtocolViolation("mask_input: wrong vector length");

  fieldvec::MaskVector masked = input;
  masked += fieldvec::prg_expand(
      self_seed_, derive::self_mask_tag(config_->round_id, id_),
      config_->vec_len);
  for (const ClientId j : mask_neighbors_) {
    const fieldvec::MaskVector pm = fieldvec::prg_expand(
        pairwise_seeds_.at(j),
        derive::pair_mask_tag(config_->round_id, id_, j), config_->vec_len);
    if (j > id_)
      masked += pm;
    else
      masked -= pm;
  }
  phase_ = Phase::MaskedSent;
  return wire::MaskedInput{id_, std::move(masked)};
}

wire::UnmaskResponse Client::unmask_respond(const wire::UnmaskRequest& req) {
  if (phase_ != Phase::MaskedSent)
    throw ProtocolViolation("unmask_respond called out of phase");

  // Privacy-critical guard: a client id in both sets would let the server
  // recover both the pairwise seeds and the self seed of one client.
  std::unordered_set<ClientId> dropped(req.dropped_set.begin(),
                                       req.dropped_set.end());
  for (const ClientId c : req.survivor_set)
    if (dropped.count(c))
      throw ProtocolViolation(
          "unmask request lists a client as both dropped and survivor");

  wire::UnmaskResponse resp;
  resp.client = id_;
  for (const ClientId c : req.dropped_set) {
    const auto it = held_ka_shares_.find(c);
    if (it != held_ka_shares_.end())
      resp.entries.push_back({c, wire::ShareKind::KaKey, it->second});
  }
  for (const ClientId c : req.survivor_set) {
    const auto it = held_seed_shares_.find(c);
    if (it != held_seed_shares_.end())
      resp.entries.push_back({c, wire::ShareKind::SelfSeed, it->second});
  }
  phase_ = Phase::Done;
  return resp;
}

DropoutSchedule make_dropout_schedule(std::uint32_t n, double theta_sim,
                                      std::uint64_t seed) {
  if (theta_sim < 0 || theta_sim >= 1)
    throw RoundFailure("theta_sim must be in [0,1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> phase(1, 3);
  DropoutSchedule sched(n, DropPhase::None);
  for (auto& d : sched)
    if (coin(rng) < theta_sim) d = static_cast<DropPhase>(phase(rng));
  return sched;
}

fieldvec::MaskVector server_recover_and_unmask(
    std::span<const wire::MaskedInput> masked_inputs,
    std::span<const wire::UnmaskResponse> responses,
    const RecoveryContext& ctx) {
  const RoundConfig& cfg = *ctx.config;

  std::unordered_set<ClientId> included(ctx.included.begin(),
                                        ctx.included.end());
  for (const ClientId d : ctx.dropped)
    if (included.count(d))
      throw ProtocolViolation("client in both dropped and included sets");

  fieldvec::MaskVector sum(cfg.vec_len);
  for (const auto& mi : masked_inputs) {
    if (!included.count(mi.client))
      throw ProtocolViolation("masked input from non-included client");
    sum += mi.vec;
  }

  // Collect shares per subject, deduplicating by evaluation index.
  std::unordered_map<ClientId, std::map<std::uint8_t, shamir::Share>>
      seed_shares, ka_shares;
  for (const auto& resp : responses) {
    for (const auto& e : resp.entries) {
      auto& bucket = e.kind == wire::ShareKind::SelfSeed
                         ? seed_shares[e.subject]
                         : ka_shares[e.subject];
      bucket.emplace(e.share.index, e.share);
    }
  }

  const auto take = [](const std::map<std::uint8_t, shamir::Share>& bucket,
                       unsigned t) {
    std::vector<shamir::Share> out;
    for (const auto& [idx, sh] : bucket) {
      out.push_back(sh);
      if (out.size() == t) break;
    }
    return out;
  };

  // Remove every included client's self mask.
  for (const ClientId i : ctx.included) {
    const unsigned t = ctx.thresholds[i];
    const auto it = seed_shares.find(i);
    if (it == seed_shares.end() || it->second.size() < t)
      throw RoundFailure("insufficient self-seed shares for client " +
                         std::to_string(i));
    const crypto::Bytes seed_bytes = shamir::reconstruct(take(it->second, t),
                                                         t);
    crypto::Seed16 seed{};
    std::copy_n(seed_bytes.begin(), 16, seed.begin());
    sum -= fieldvec::prg_expand(seed, derive::self_mask_tag(cfg.round_id, i),
                                cfg.vec_len);
  }

  // Cancel pairwise masks that included clients applied toward dropped ones.
  for (const ClientId d : ctx.dropped) {
    std::vector<ClientId> partners;
    for (const ClientId j : ctx.included)
      if (std::binary_search(ctx.mask_neighbors[j].begin(),
                             ctx.mask_neighbors[j].end(), d))
        partners.push_back(j);
    if (partners.empty()) continue;

    const unsigned t = ctx.thresholds[d];
    const auto it = ka_shares.find(d);
    if (it == ka_shares.end() || it->second.size() < t)
      throw RoundFailure("insufficient KA-key shares for dropped client " +
                         std::to_string(d));
    const crypto::Bytes key_bytes = shamir::reconstruct(take(it->second, t),
                                                        t);
    crypto::Key32 priv{};
    std::copy_n(key_bytes.begin(), 32, priv.begin());

    for (const ClientId j : partners) {
      const crypto::Key32 shared =
          crypto::x25519_shared(priv, ctx.public_keys[j]);
      const crypto::Seed16 seed = derive::mask_seed(shared, cfg.round_id, d,
                                                    j);
      const fieldvec::MaskVector pm = fieldvec::prg_expand(
          seed, derive::pair_mask_tag(cfg.round_id, d, j), cfg.vec_len);
      // j applied +pm when d > j, -pm when d < j.
      if (d > j)
        sum -= pm;
      else
        sum += pm;
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Loopback TCP transport

LoopbackTcpTransport::LoopbackTcpTransport() {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error("tcp: socket failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listener, 1) < 0) {
    ::close(listener);
    throw std::runtime_error("tcp: bind/listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);

  send_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (send_fd_ < 0 ||
      ::connect(send_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
          0) {
    ::close(listener);
    throw std::runtime_error("tcp: connect failed");
  }
  recv_fd_ = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (recv_fd_ < 0) throw std::runtime_error("tcp: accept failed");
  const int one = 1;
  ::setsockopt(send_fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  ::fcntl(send_fd_, F_SETFL, O_NONBLOCK);
  ::fcntl(recv_fd_, F_SETFL, O_NONBLOCK);
}

LoopbackTcpTransport::~LoopbackTcpTransport() {
  if (send_fd_ >= 0) ::close(send_fd_);
  if (recv_fd_ >= 0) ::close(recv_fd_);
}

crypto::Bytes LoopbackTcpTransport::transfer(const crypto::Bytes& frame) {
  crypto::Bytes out(frame.size());
  std::size_t written = 0, read = 0;
  while (read < frame.size()) {
    if (written < frame.size()) {
      const ssize_t w = ::write(send_fd_, frame.data() + written,
                                frame.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      else if (w < 0 && errno != EAGAIN && errno != EWOULDBLOCK)
        throw std::runtime_error("tcp: write failed");
    }
    const ssize_t r = ::read(recv_fd_, out.data() + read, out.size() - read);
    if (r > 0) read += static_cast<std::size_t>(r);
    else if (r < 0 && errno != EAGAIN && errno != EWOULDBLOCK)
      throw std::runtime_error("tcp: read failed");
    else if (r == 0)
      throw std::runtime_error("tcp: connection closed");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Round orchestration

RoundResult server_run_round(const RoundConfig& config,
                             const NeighborGraph& graph,
                             std::span<const fieldvec::MaskVector> inputs,
                             const DropoutSchedule& dropouts,
                             std::uint64_t seed, Transport& transport) {
  config.validate();
  if (inputs.size() != config.n)
    throw RoundFailure("inputs size does not match n");
  if (graph.size() != config.n)
    throw RoundFailure("graph size does not match n");
  if (dropouts.size() != config.n)
    throw RoundFailure("dropout schedule size does not match n");
  for (const auto& in : inputs)
    if (in.size() != config.vec_len)
      throw RoundFailure("input vector length mismatch");

  const auto round_start = Clock::now();
  const std::uint32_t n = config.n;

  RoundReport report;
  report.bytes_sent.assign(n, 0);
  report.bytes_received.assign(n, 0);

  const auto client_send = [&](ClientId c, const wire::Message& msg) {
    const crypto::Bytes frame = wire::serialize(msg, config.round_id);
    const crypto::Bytes delivered = transport.transfer(frame);
    report.bytes_sent[c] += frame.size();
    report.server_bytes_received += frame.size();
    return wire::parse(delivered);
  };
  const auto server_send = [&](ClientId c, const wire::Message& msg) {
    const crypto::Bytes frame = wire::serialize(msg, config.round_id);
    const crypto::Bytes delivered = transport.transfer(frame);
    report.server_bytes_sent += frame.size();
    report.bytes_received[c] += frame.size();
    return wire::parse(delivered);
  };

  std::mt19937_64 seeder(seed);
  std::vector<Client> clients;
  clients.reserve(n);
  for (ClientId i = 0; i < n; ++i) clients.emplace_back(i, config, seeder());

  // Phase 1: key adverts.
  auto phase_start = Clock::now();
  std::vector<wire::KeyAdvert> adverts(n);
  for (ClientId i = 0; i < n; ++i) {
    const auto parsed = client_send(i, clients[i].advertise());
    adverts[i] = std::get<wire::KeyAdvert>(parsed.msg);
  }
  std::vector<bool> alive(n, true);
  for (ClientId i = 0; i < n; ++i)
    if (dropouts[i] == DropPhase::AfterKeys) {
      alive[i] = false;
      clients[i].mark_dropped();
    }
  report.keys_seconds = seconds_since(phase_start);

  // Phase 2: share distribution among live clients.
  phase_start = Clock::now();
  std::vector<wire::EncryptedShares> share_msgs;
  for (ClientId i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    std::vector<wire::KeyAdvert> neighbor_adverts;
    for (const ClientId j : graph.neighbors(i)) {
      if (!alive[j]) continue;
      const auto parsed = server_send(i, adverts[j]);
      neighbor_adverts.push_back(std::get<wire::KeyAdvert>(parsed.msg));
    }
    const auto t0 = Clock::now();
    wire::EncryptedShares es = clients[i].distribute_shares(neighbor_adverts);
    report.sharing_seconds += seconds_since(t0);
    const auto parsed = client_send(i, es);
    share_msgs.push_back(std::get<wire::EncryptedShares>(parsed.msg));
  }
  for (const auto& es : share_msgs) {
    for (const auto& entry : es.entries) {
      wire::EncryptedShares fwd;
      fwd.client = es.client;
      fwd.entries.push_back(entry);
      const auto parsed = server_send(entry.neighbor, fwd);
      const auto& m = std::get<wire::EncryptedShares>(parsed.msg);
      clients[entry.neighbor].receive_shares(m.client,
                                             m.entries.at(0).ciphertext);
    }
  }
  std::vector<ClientId> shares_sent_by;
  for (ClientId i = 0; i < n; ++i)
    if (alive[i]) shares_sent_by.push_back(i);
  for (ClientId i = 0; i < n; ++i)
    if (dropouts[i] == DropPhase::AfterShares) {
      alive[i] = false;
      clients[i].mark_dropped();
    }
  report.shares_seconds = seconds_since(phase_start);

  // Phase 3: masked inputs.
  phase_start = Clock::now();
  std::vector<wire::MaskedInput> masked;
  std::vector<ClientId> included;
  for (ClientId i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    const auto t0 = Clock::now();
    wire::MaskedInput mi = clients[i].mask_input(inputs[i]);
    report.prg_seconds += seconds_since(t0);
    const auto parsed = client_send(i, mi);
    masked.push_back(std::get<wire::MaskedInput>(parsed.msg));
    included.push_back(i);
  }
  report.mask_seconds = seconds_since(phase_start);

  // Dropped clients that distributed shares need pairwise-mask recovery;
  // clients dropping after masking are included and only respond late.
  std::vector<ClientId> dropped_needing_recovery;
  for (const ClientId i : shares_sent_by)
    if (!alive[i]) dropped_needing_recovery.push_back(i);

  // Phase 4: unmask responses from everyone whose masked input arrived.
  // Each request is restricted to the recipient's neighborhood so per-client
  // traffic stays O(deg), not O(n).
  phase_start = Clock::now();
  std::vector<bool> is_included(n, false), is_dropped(n, false);
  for (const ClientId i : included) is_included[i] = true;
  for (const ClientId i : dropped_needing_recovery) is_dropped[i] = true;
  std::vector<wire::UnmaskResponse> responses;
  for (const ClientId i : included) {
    wire::UnmaskRequest request;
    for (const ClientId j : clients[i].mask_neighbors()) {
      if (is_dropped[j]) request.dropped_set.push_back(j);
      if (is_included[j]) request.survivor_set.push_back(j);
    }
    request.survivor_set.push_back(i);  // isolated clients hold a self share
    const auto req_parsed = server_send(i, request);
    const auto resp = clients[i].unmask_respond(
        std::get<wire::UnmaskRequest>(req_parsed.msg));
    const auto parsed = client_send(i, resp);
    responses.push_back(std::get<wire::UnmaskResponse>(parsed.msg));
  }
  for (ClientId i = 0; i < n; ++i)
    if (dropouts[i] == DropPhase::AfterMasking) clients[i].mark_dropped();

  RecoveryContext ctx;
  ctx.config = &config;
  ctx.included = included;
  ctx.dropped = dropped_needing_recovery;
  ctx.mask_neighbors.resize(n);
  ctx.public_keys.resize(n);
  ctx.thresholds.assign(n, 0);
  for (ClientId i = 0; i < n; ++i) {
    ctx.mask_neighbors[i] = clients[i].mask_neighbors();
    ctx.public_keys[i] = adverts[i].ka_public;
    ctx.thresholds[i] = clients[i].threshold();
  }

  RoundResult result{server_recover_and_unmask(masked, responses, ctx), {}};
  report.unmask_seconds = seconds_since(phase_start);
  report.included = std::move(included);
  report.total_seconds = seconds_since(round_start);
  result.report = std::move(report);
  return result;
}

}  // namespace privagg::secsum
