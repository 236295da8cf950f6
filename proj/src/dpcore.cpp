#include "privagg/dpcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace privagg::dp {

void PrivacyParams::validate() const {
  if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
  if (theta < 0 || theta >= 1)
    throw std::invalid_argument("theta must be in [0,1)");
  if (cap_c < 1 || cap_b < 1) throw std::invalid_argument("caps must be >= 1");
}

double PrivacyParams::label_scale(std::size_t num_labels) const {
  validate();
  double scale = static_cast<double>(cap_c) / (epsilon * (1.0 - theta));
  if (strict_composition) scale *= static_cast<double>(num_labels);
  return scale;
}

double PrivacyParams::bt_scale(std::size_t num_labels) const {
  validate();
  double scale = static_cast<double>(cap_b) / (epsilon * (1.0 - theta));
  if (strict_composition) scale *= static_cast<double>(num_labels);
  return scale;
}

LocalHistogram clip_histogram(const LocalHistogram& h,
                              const PrivacyParams& params) {
  params.validate();
  LocalHistogram out = h;
  for (auto& c : out.label_counts) c = std::min(c, params.cap_c);
  out.bt_device_count = std::min(out.bt_device_count, params.cap_b);
  return out;
}

std::int64_t sample_discrete_laplace(double scale, std::mt19937_64& rng) {
  if (!(scale > 0)) throw std::invalid_argument("scale must be positive");
  // Difference of two iid geometrics on {0,1,...} with success probability
  // 1 - exp(-1/scale) is two-sided geometric with ratio exp(-1/scale).
  const double q = std::exp(-1.0 / scale);
  std::geometric_distribution<std::int64_t> geo(1.0 - q);
  return geo(rng) - geo(rng);
}

double discrete_laplace_variance(double scale) {
  if (!(scale > 0)) throw std::invalid_argument("scale must be positive");
  const double q = std::exp(-1.0 / scale);
  return 2.0 * q / ((1.0 - q) * (1.0 - q));
}

fieldvec::MaskVector noise_and_encode(const LocalHistogram& h,
                                      const PrivacyParams& params,
                                      const fieldvec::EncodingParams& enc,
                                      std::mt19937_64& rng) {
  params.validate();
  const std::size_t num_labels = h.label_counts.size();
  if (enc.vec_len != num_labels + 1)
    throw std::invalid_argument("noise_and_encode: vec_len must be L + 1");
  for (const auto c : h.label_counts)
    if (c > params.cap_c)
      throw std::invalid_argument("noise_and_encode: unclipped label count");
  if (h.bt_device_count > params.cap_b)
    throw std::invalid_argument("noise_and_encode: unclipped device count");

  const double c_scale = params.label_scale(num_labels);
  const double b_scale = params.bt_scale(num_labels);

  std::vector<std::int64_t> noised(enc.vec_len);
  for (std::size_t i = 0; i < num_labels; ++i)
    noised[i] = static_cast<std::int64_t>(h.label_counts[i]) +
                sample_discrete_laplace(c_scale, rng);
  noised[num_labels] = static_cast<std::int64_t>(h.bt_device_count) +
                       sample_discrete_laplace(b_scale, rng);
  return fieldvec::encode_counts(noised, enc);
}

}  // namespace privagg::dp
