#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "privagg/crypto.hpp"
#include "privagg/fieldvec.hpp"
#include "privagg/shamir.hpp"
#include "privagg/wire.hpp"

namespace privagg::secsum {

using wire::ClientId;
using wire::RoundId;

struct ProtocolViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unmet recovery precondition or config error: the round aborts loudly.
struct RoundFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RoundConfig {
  std::uint32_t n = 0;        // client count
  std::uint32_t k = 0;        // graph degree target
  std::uint32_t t = 0;        // reconstruction threshold; 0 = per-client default
  std::size_t vec_len = 0;    // mask vector length
  RoundId round_id{};
  // Protocol graph parameters, carried for reporting and preset selection.
  double gamma = 1.0 / 20;
  double delta = 1.0 / 3;
  double sigma = 40;
  double eta = 30;
  double theta = 0.0;  // expected dropout fraction

  void validate() const;
};

class NeighborGraph {
 public:
  // Each client samples k distinct others via the seeded generator; edges are
  // symmetrized by union. Deterministic for a given seed.
  static NeighborGraph build(std::uint32_t n, std::uint32_t k,
                             std::uint64_t graph_seed);

  std::size_t size() const { return adjacency_.size(); }
  const std::vector<ClientId>& neighbors(ClientId i) const {
    return adjacency_.at(i);
  }

 private:
  std::vector<std::vector<ClientId>> adjacency_;  // sorted, symmetric
};

enum class Phase { Initial, KeysSent, SharesSent, MaskedSent, Done, Dropped };

// Per-client protocol state machine. All randomness is drawn from the
// per-client seeded generator so rounds replay deterministically.
class Client {
 public:
  Client(ClientId id, const RoundConfig& config, std::uint64_t rng_seed);

  wire::KeyAdvert advertise();

  // neighbor_adverts define the live neighbor set this client shares with and
  // masks over. Threshold: config.t, or ceil(2*deg/3) when config.t == 0.
  wire::EncryptedShares distribute_shares(
      std::span<const wire::KeyAdvert> neighbor_adverts);

  // Decrypt and hold the share pair a neighbor sent us.
  void receive_shares(ClientId from, std::span<const std::uint8_t> ciphertext);

  wire::MaskedInput mask_input(const fieldvec::MaskVector& input);

  // Returns held KA-key shares for dropped neighbors and held self-seed
  // shares for surviving neighbors; aborts if the sets overlap.
  wire::UnmaskResponse unmask_respond(const wire::UnmaskRequest& request);

  void mark_dropped() { phase_ = Phase::Dropped; }

  ClientId id() const { return id_; }
  Phase phase() const { return phase_; }
  unsigned threshold() const { return threshold_; }
  const crypto::Key32& public_key() const { return ka_.public_key; }
  const std::vector<ClientId>& mask_neighbors() const {
    return mask_neighbors_;
  }

 private:
  ClientId id_;
  const RoundConfig* config_;
  std::mt19937_64 rng_;
  Phase phase_ = Phase::Initial;
  crypto::KaKeyPair ka_{};
  crypto::Seed16 self_seed_{};
  unsigned threshold_ = 0;
  std::vector<ClientId> mask_neighbors_;               // sorted
  std::map<ClientId, crypto::Seed16> pairwise_seeds_;  // per neighbor
  std::map<ClientId, crypto::Key32> shared_secrets_;   // per neighbor
  std::map<ClientId, shamir::Share> held_ka_shares_;
  std::map<ClientId, shamir::Share> held_seed_shares_;
};

// Key/tag derivations shared between clients and the unmasking server.
namespace derive {
crypto::Seed16 mask_seed(const crypto::Key32& shared, const RoundId& round_id,
                         ClientId a, ClientId b);
crypto::Seed16 enc_key(const crypto::Key32& shared, const RoundId& round_id,
                       ClientId sender, ClientId receiver);
std::array<std::uint8_t, 12> enc_nonce(const RoundId& round_id,
                                       ClientId sender, ClientId receiver);
crypto::Bytes self_mask_tag(const RoundId& round_id, ClientId i);
crypto::Bytes pair_mask_tag(const RoundId& round_id, ClientId a, ClientId b);
}  // namespace derive

// ---------------------------------------------------------------------------
// Server side

enum class DropPhase : std::uint8_t {
  None = 0,
  AfterKeys = 1,
  AfterShares = 2,
  AfterMasking = 3,
};

// One entry per client.
using DropoutSchedule = std::vector<DropPhase>;

// Each client independently drops with probability theta_sim, at one of the
// three phase boundaries chosen uniformly.
DropoutSchedule make_dropout_schedule(std::uint32_t n, double theta_sim,
                                      std::uint64_t seed);

struct RoundReport {
  std::vector<ClientId> included;
  std::vector<std::uint64_t> bytes_sent;      // per client
  std::vector<std::uint64_t> bytes_received;  // per client
  std::uint64_t server_bytes_sent = 0;
  std::uint64_t server_bytes_received = 0;
  double keys_seconds = 0;
  double shares_seconds = 0;
  double mask_seconds = 0;
  double unmask_seconds = 0;
  double sharing_seconds = 0;  // time spent inside share splitting/encryption
  double prg_seconds = 0;      // time spent expanding masks
  double total_seconds = 0;
};

struct RoundResult {
  fieldvec::MaskVector sum;
  RoundReport report;
};

// Everything the server needs to undo masks after collecting responses.
struct RecoveryContext {
  const RoundConfig* config = nullptr;
  std::vector<std::vector<ClientId>> mask_neighbors;  // per client
  std::vector<crypto::Key32> public_keys;             // per client
  std::vector<unsigned> thresholds;                   // per client
  std::vector<ClientId> included;  // clients whose MaskedInput arrived
  std::vector<ClientId> dropped;   // sent shares, never masked
};

fieldvec::MaskVector server_recover_and_unmask(
    std::span<const wire::MaskedInput> masked_inputs,
    std::span<const wire::UnmaskResponse> responses,
    const RecoveryContext& ctx);

// Byte-moving abstraction; both variants carry the exact wire format and feed
// the same byte accounting.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual crypto::Bytes transfer(const crypto::Bytes& frame) = 0;
};

class InProcessTransport final : public Transport {
 public:
  crypto::Bytes transfer(const crypto::Bytes& frame) override { return frame; }
};

// Pushes every frame through a real TCP connection on 127.0.0.1.
class LoopbackTcpTransport final : public Transport {
 public:
  LoopbackTcpTransport();
  ~LoopbackTcpTransport() override;
  crypto::Bytes transfer(const crypto::Bytes& frame) override;

 private:
  int send_fd_ = -1;
  int recv_fd_ = -1;
};

// Orchestrates one full round over the given graph with injected dropouts.
// inputs.size() must equal config.n. Throws RoundFailure when any required
// recovery cannot be satisfied.
RoundResult server_run_round(const RoundConfig& config,
                             const NeighborGraph& graph,
                             std::span<const fieldvec::MaskVector> inputs,
                             const DropoutSchedule& dropouts,
                             std::uint64_t seed, Transport& transport);

}  // namespace privagg::secsum
