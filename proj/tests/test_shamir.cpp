#include <doctest.h>

#include <algorithm>
#include <random>

#include "privagg/shamir.hpp"

using namespace privagg;
using shamir::Share;

namespace {

crypto::Bytes random_secret(std::size_t len, std::mt19937_64& rng) {
  crypto::Bytes s(len);
  for (auto& b : s) b = static_cast<std::uint8_t>(rng());
  return s;
}

}  // namespace

TEST_CASE("t=1 shares equal the secret") {
  std::mt19937_64 rng(1);
  const auto secret = random_secret(16, rng);
  const auto shares = shamir::split(secret, 1, 5, rng);
  for (const auto& s : shares) CHECK(s.payload == secret);
  CHECK(shamir::reconstruct(std::vector<Share>{shares[2]}, 1) == secret);
}

TEST_CASE("share indices are exactly 1..m") {
  std::mt19937_64 rng(2);
  const auto secret = random_secret(4, rng);
  const auto shares = shamir::split(secret, 3, 9, rng);
  REQUIRE(shares.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(shares[i].index == i + 1);
}

TEST_CASE("reconstruct from specific subsets") {
  std::mt19937_64 rng(3);
  const auto secret = random_secret(16, rng);
  const auto shares = shamir::split(secret, 3, 5, rng);
  const std::vector<Share> sub1{shares[0], shares[2], shares[4]};
  const std::vector<Share> sub2{shares[1], shares[3], shares[4]};
  CHECK(shamir::reconstruct(sub1, 3) == secret);
  CHECK(shamir::reconstruct(sub2, 3) == secret);
}

TEST_CASE("round-trip over random (secret, t <= m <= 10)") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<unsigned> m_dist(1, 10);
  std::uniform_int_distribution<std::size_t> len_dist(1, 32);
  for (int trial = 0; trial < 100; ++trial) {
    const unsigned m = m_dist(rng);
    std::uniform_int_distribution<unsigned> t_dist(1, m);
    const unsigned t = t_dist(rng);
    const auto secret = random_secret(len_dist(rng), rng);
    auto shares = shamir::split(secret, t, m, rng);
    std::shuffle(shares.begin(), shares.end(), rng);
    shares.resize(t);
    CHECK(shamir::reconstruct(shares, t) == secret);
  }
}

TEST_CASE("exhaustive any-t-subset reconstruction at (t=3, m=7)") {
  std::mt19937_64 rng(5);
  const auto secret = random_secret(16, rng);
  const auto shares = shamir::split(secret, 3, 7, rng);
  int subsets = 0;
  for (int a = 0; a < 7; ++a)
    for (int b = a + 1; b < 7; ++b)
      for (int c = b + 1; c < 7; ++c) {
        const std::vector<Share> sub{shares[a], shares[b], shares[c]};
        CHECK(shamir::reconstruct(sub, 3) == secret);
        ++subsets;
      }
  CHECK(subsets == 35);
}

// With t-1 shares fixed, every candidate secret is consistent with exactly
// one polynomial: verified by exhaustive enumeration over GF(256).
TEST_CASE("perfect hiding at t=2") {
  // Fixed share (1, y1): for every candidate secret s there must be exactly
  // one degree-1 polynomial with p(0)=s and p(1)=y1.
  for (int y1 = 0; y1 < 256; ++y1) {
    for (int s = 0; s < 256; ++s) {
      int consistent = 0;
      for (int a1 = 0; a1 < 256; ++a1) {
        const std::uint8_t p1 =
            static_cast<std::uint8_t>(s) ^
            shamir::gf256::mul(static_cast<std::uint8_t>(a1), 1);
        if (p1 == y1) ++consistent;
      }
      CHECK(consistent == 1);
    }
  }
}

TEST_CASE("perfect hiding at t=3") {
  // Two fixed shares at x=1, x=2; for every candidate secret there must be
  // exactly one degree-2 polynomial through all three points.
  std::mt19937_64 rng(6);
  const std::uint8_t y1 = static_cast<std::uint8_t>(rng());
  const std::uint8_t y2 = static_cast<std::uint8_t>(rng());
  for (int s = 0; s < 256; ++s) {
    int consistent = 0;
    for (int a1 = 0; a1 < 256; ++a1)
      for (int a2 = 0; a2 < 256; ++a2) {
        const auto eval = [&](std::uint8_t x) {
          using shamir::gf256::mul;
          return static_cast<std::uint8_t>(
              s ^ mul(static_cast<std::uint8_t>(a1), x) ^
              mul(static_cast<std::uint8_t>(a2), mul(x, x)));
        };
        if (eval(1) == y1 && eval(2) == y2) ++consistent;
      }
    CHECK(consistent == 1);
  }
}

TEST_CASE("error paths") {
  std::mt19937_64 rng(7);
  const auto secret = random_secret(8, rng);
  CHECK_THROWS_AS(shamir::split({}, 1, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(shamir::split(secret, 4, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(shamir::split(secret, 1, 256, rng), std::invalid_argument);

  auto shares = shamir::split(secret, 3, 5, rng);
  CHECK_THROWS_AS(
      shamir::reconstruct(std::vector<Share>{shares[0], shares[1]}, 3),
      std::invalid_argument);
  const std::vector<Share> dup{shares[0], shares[0], shares[1]};
  CHECK_THROWS_AS(shamir::reconstruct(dup, 3), std::invalid_argument);
  Share bad = shares[2];
  bad.payload.pop_back();
  const std::vector<Share> mismatched{shares[0], shares[1], bad};
  CHECK_THROWS_AS(shamir::reconstruct(mismatched, 3), std::invalid_argument);
}

TEST_CASE("share serialization") {
  Share s{7, {0xde, 0xad, 0xbe, 0xef}};
  const auto ser = s.serialize();
  REQUIRE(ser.size() == 5);
  CHECK(ser[0] == 7);
  CHECK(Share::deserialize(ser) == s);
}
