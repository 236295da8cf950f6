#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "privagg/fieldvec.hpp"

namespace privagg::dp {

struct PrivacyParams {
  double epsilon = 1.0;       // privacy budget
  double theta = 0.0;         // expected dropout fraction, [0,1)
  std::uint64_t cap_c = 1;    // per-label count cap
  std::uint64_t cap_b = 1;    // Bluetooth device count cap
  // When set, the per-coordinate scale is multiplied by the number of
  // histogram coordinates (strict whole-histogram accounting).
  bool strict_composition = false;

  void validate() const;

  // Noise scale for label counts: c / (epsilon * (1 - theta)), times L under
  // strict composition.
  double label_scale(std::size_t num_labels) const;
  double bt_scale(std::size_t num_labels) const;
};

struct LocalHistogram {
  std::vector<std::uint64_t> label_counts;
  std::uint64_t bt_device_count = 0;

  bool operator==(const LocalHistogram&) const = default;
};

// Replaces each label count by min(count, c) and the device count by
// min(count, b). Idempotent.
LocalHistogram clip_histogram(const LocalHistogram& h,
                              const PrivacyParams& params);

// Two-sided geometric: P(X = x) proportional to exp(-|x| / scale).
std::int64_t sample_discrete_laplace(double scale, std::mt19937_64& rng);

// Analytic variance of the two-sided geometric at the given scale.
double discrete_laplace_variance(double scale);

// Adds dropout-compensated discrete Laplace noise to every coordinate of a
// clipped histogram and encodes it for group summation. enc.vec_len must be
// label count + 1; the last coordinate carries the device count.
fieldvec::MaskVector noise_and_encode(const LocalHistogram& h,
                                      const PrivacyParams& params,
                                      const fieldvec::EncodingParams& enc,
                                      std::mt19937_64& rng);

}  // namespace privagg::dp
