#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "privagg/dpcore.hpp"

using namespace privagg;
using dp::LocalHistogram;
using dp::PrivacyParams;

TEST_CASE("clip_histogram below caps is a no-op") {
  PrivacyParams p{1.0, 0.0, 3, 5};
  const LocalHistogram h{{2, 0, 1}, 4};
  CHECK(dp::clip_histogram(h, p) == h);
}

TEST_CASE("clip_histogram caps counts") {
  PrivacyParams p{1.0, 0.0, 3, 5};
  const LocalHistogram h{{9, 0}, 12};
  const auto c = dp::clip_histogram(h, p);
  CHECK(c.label_counts == std::vector<std::uint64_t>{3, 0});
  CHECK(c.bt_device_count == 5);
}

TEST_CASE("clip_histogram is idempotent on random inputs") {
  PrivacyParams p{1.0, 0.0, 4, 7};
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::uint64_t> dist(0, 20);
  for (int trial = 0; trial < 100; ++trial) {
    LocalHistogram h;
    h.label_counts.resize(6);
    for (auto& c : h.label_counts) c = dist(rng);
    h.bt_device_count = dist(rng);
    const auto once = dp::clip_histogram(h, p);
    CHECK(dp::clip_histogram(once, p) == once);
  }
}

TEST_CASE("discrete laplace: tiny scale returns zero") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 100000; ++i)
    CHECK(dp::sample_discrete_laplace(1e-6, rng) == 0);
}

TEST_CASE("discrete laplace: pmf ratio matches exp(-1/scale)") {
  std::mt19937_64 rng(41);
  const double scale = 3.0;
  std::map<std::int64_t, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[dp::sample_discrete_laplace(scale, rng)];
  const double ratio =
      static_cast<double>(counts[1]) / static_cast<double>(counts[0]);
  CHECK(ratio == doctest::Approx(std::exp(-1.0 / scale)).epsilon(0.05));
  CHECK(std::fabs(ratio - std::exp(-1.0 / scale)) < 0.03);
}

TEST_CASE("discrete laplace: mean and variance match analytic values") {
  std::mt19937_64 rng(43);
  const double scale = 3.0;
  const int n = 100000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x =
        static_cast<double>(dp::sample_discrete_laplace(scale, rng));
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  const double analytic_var = dp::discrete_laplace_variance(scale);
  CHECK(std::fabs(mean) < 3.0 * std::sqrt(analytic_var / n));
  CHECK(var == doctest::Approx(analytic_var).epsilon(0.05));
}

TEST_CASE("noise scales: theta=0 gives c/eps and b/eps") {
  PrivacyParams p{2.0, 0.0, 6, 10};
  CHECK(p.label_scale(5) == doctest::Approx(3.0));
  CHECK(p.bt_scale(5) == doctest::Approx(5.0));
}

TEST_CASE("noise scales: theta=1/3 multiplies by 1.5 exactly") {
  PrivacyParams p0{1.0, 0.0, 3, 4};
  PrivacyParams p{1.0, 1.0 / 3.0, 3, 4};
  CHECK(p.label_scale(5) == doctest::Approx(1.5 * p0.label_scale(5)));
  CHECK(p.bt_scale(5) == doctest::Approx(1.5 * p0.bt_scale(5)));
}

TEST_CASE("strict composition multiplies the scale by L") {
  PrivacyParams p{1.0, 0.0, 3, 4};
  p.strict_composition = true;
  CHECK(p.label_scale(5) == doctest::Approx(5 * 3.0));
}

TEST_CASE("noise_and_encode: near-zero noise decodes to the histogram") {
  PrivacyParams p{1e6, 0.0, 3, 5};
  const fieldvec::EncodingParams enc{4, 1ULL << 40};
  std::mt19937_64 rng(47);
  std::uniform_int_distribution<std::uint64_t> dist(0, 3);
  int exact = 0;
  const int trials = 1000;
  for (int trial = 0; trial < trials; ++trial) {
    LocalHistogram h;
    h.label_counts = {dist(rng), dist(rng), dist(rng)};
    h.bt_device_count = dist(rng);
    const auto v = dp::noise_and_encode(h, p, enc, rng);
    const auto decoded = fieldvec::decode_sum(v, enc, 1);
    const bool match =
        decoded[0] == static_cast<std::int64_t>(h.label_counts[0]) &&
        decoded[1] == static_cast<std::int64_t>(h.label_counts[1]) &&
        decoded[2] == static_cast<std::int64_t>(h.label_counts[2]) &&
        decoded[3] == static_cast<std::int64_t>(h.bt_device_count);
    if (match) ++exact;
  }
  CHECK(exact >= trials * 99 / 100);
}

TEST_CASE("noise_and_encode rejects unclipped input and bad lengths") {
  PrivacyParams p{1.0, 0.0, 3, 5};
  const fieldvec::EncodingParams enc{3, 1ULL << 40};
  std::mt19937_64 rng(53);
  const LocalHistogram unclipped{{7, 0}, 1};
  CHECK_THROWS_AS(dp::noise_and_encode(unclipped, p, enc, rng),
                  std::invalid_argument);
  const LocalHistogram ok{{1, 0}, 1};
  const fieldvec::EncodingParams wrong{5, 1ULL << 40};
  CHECK_THROWS_AS(dp::noise_and_encode(ok, p, wrong, rng),
                  std::invalid_argument);
}

// Mechanism-level DP ratio bound on the scalar count mechanism.
TEST_CASE("dp ratio: adjacent inputs differ by at most exp(eps) empirically") {
  const double eps = 1.0;
  const std::int64_t c = 3;
  const double scale = static_cast<double>(c) / eps;
  const int n = 100000;
  std::mt19937_64 rng(59);
  std::map<std::int64_t, int> h0, h1;
  for (int i = 0; i < n; ++i) {
    ++h0[0 + dp::sample_discrete_laplace(scale, rng)];
    ++h1[c + dp::sample_discrete_laplace(scale, rng)];
  }
  for (const auto& [v, n0] : h0) {
    const auto it = h1.find(v);
    if (it == h1.end()) continue;
    const int n1 = it->second;
    if (n0 < 100 || n1 < 100) continue;
    const double log_ratio =
        std::log(static_cast<double>(n0) / static_cast<double>(n1));
    CHECK(std::fabs(log_ratio) <= eps + 0.1);
  }
}

TEST_CASE("dropout compensation raises per-client variance") {
  PrivacyParams p0{1.0, 0.0, 3, 3};
  PrivacyParams p{1.0, 1.0 / 3.0, 3, 3};
  // Analytic: the compensated per-client scale strictly dominates, so after
  // removing a theta fraction the surviving noise variance still exceeds the
  // theta=0 total.
  const double var0 = dp::discrete_laplace_variance(p0.label_scale(1));
  const double var_comp = dp::discrete_laplace_variance(p.label_scale(1));
  CHECK((1.0 - p.theta) * var_comp >= var0);

  // Empirical check on the sampler at the two configured scales.
  std::mt19937_64 rng(61);
  const auto empirical_var = [&](double scale) {
    const int n = 100000;
    double s = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      const double x =
          static_cast<double>(dp::sample_discrete_laplace(scale, rng));
      s += x;
      sq += x * x;
    }
    return sq / n - (s / n) * (s / n);
  };
  CHECK(empirical_var(p.label_scale(1)) ==
        doctest::Approx(var_comp).epsilon(0.05));
}

TEST_CASE("unbiasedness: decoded aggregate is centered on the clipped sum") {
  PrivacyParams p{1.0, 0.0, 3, 3};
  const fieldvec::EncodingParams enc{2, 1ULL << 40};
  std::mt19937_64 rng(67);
  const LocalHistogram h{{2}, 1};
  const int rounds = 500, clients = 8;
  double err_sum = 0, err_sq = 0;
  for (int r = 0; r < rounds; ++r) {
    fieldvec::MaskVector acc(2);
    for (int c = 0; c < clients; ++c)
      acc += dp::noise_and_encode(h, p, enc, rng);
    const auto decoded = fieldvec::decode_sum(acc, enc, clients);
    const double err = static_cast<double>(decoded[0]) - 2.0 * clients;
    err_sum += err;
    err_sq += err * err;
  }
  const double mean_err = err_sum / rounds;
  const double stderr_mean =
      std::sqrt((err_sq / rounds - mean_err * mean_err) / rounds);
  CHECK(std::fabs(mean_err) <= 3.0 * stderr_mean + 1e-9);
}

TEST_CASE("parameter validation") {
  std::mt19937_64 rng(71);
  CHECK_THROWS_AS(dp::sample_discrete_laplace(0.0, rng),
                  std::invalid_argument);
  PrivacyParams bad_eps{0.0, 0.0, 1, 1};
  CHECK_THROWS_AS(bad_eps.validate(), std::invalid_argument);
  PrivacyParams bad_theta{1.0, 1.0, 1, 1};
  CHECK_THROWS_AS(bad_theta.validate(), std::invalid_argument);
}
