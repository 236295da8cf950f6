#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "privagg/dpcore.hpp"

namespace privagg::traces {

using Point = std::vector<double>;

struct TraceConfig {
  unsigned num_labels = 10;      // label alphabet size
  unsigned trace_len = 24;       // steps per trace
  unsigned num_routines = 5;     // routine base walks
  double routine_fraction = 0.8; // remainder is noise traces
  double perturbation_std = 0.05;
  std::size_t n_walks = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

// Label index at each step scaled by 1/(num_labels - 1), so every value is
// in [0,1].
struct TraceDataset {
  std::vector<Point> traces;
  std::vector<Point> routine_bases;
  // routine id per trace, or -1 for a noise trace
  std::vector<int> routine_of;
};

TraceDataset generate_traces(const TraceConfig& config);

struct ClusterModel {
  std::vector<Point> centers;
  std::vector<double> weights;
};

// Lloyd's algorithm with k-means++-style seeding.
ClusterModel kmeans_baseline(const std::vector<Point>& data, unsigned k,
                             unsigned iters, std::uint64_t seed);

// DP Lloyd's over data in [0,1]^d: epsilon split evenly across iterations,
// then evenly between per-cluster counts (sensitivity 1) and per-cluster
// coordinate sums (sensitivity d).
ClusterModel dp_kmeans_central(const std::vector<Point>& data, unsigned k,
                               double epsilon, unsigned iters,
                               std::uint64_t seed);

// Weighted Lloyd's; used by the aggregate-side decode.
ClusterModel weighted_kmeans(const std::vector<Point>& points,
                             const std::vector<double>& weights, unsigned k,
                             unsigned iters, std::uint64_t seed);

// ---------------------------------------------------------------------------
// One-round distributed clustering encoding

inline constexpr std::int64_t kFixedPointScale = 1 << 16;

// Public structures broadcast by the server, derived from one seed.
struct LshPublic {
  std::vector<Point> projection;  // d' rows of length d, entries ~N(0,1)/sqrt(d')
  std::vector<Point> refs;        // m reference points in the projected space

  std::size_t input_dim() const { return projection.empty() ? 0 : projection[0].size(); }
  std::size_t proj_dim() const { return projection.size(); }
};

LshPublic make_lsh_public(std::size_t dim, std::size_t proj_dim,
                          std::size_t num_refs, std::uint64_t seed);

struct LshEncoding {
  std::vector<std::int64_t> assign_histogram;           // m counts
  std::vector<std::vector<std::int64_t>> bucket_sums;   // m x d' fixed-point

  LshEncoding() = default;
  LshEncoding(std::size_t m, std::size_t d_prime)
      : assign_histogram(m, 0),
        bucket_sums(m, std::vector<std::int64_t>(d_prime, 0)) {}

  LshEncoding& operator+=(const LshEncoding& other);
};

// Projects each point, assigns it to the nearest reference point (ties to
// the lowest index) and accumulates the histogram and per-bucket fixed-point
// sums. With privacy set, per-cell discrete Laplace noise is added: counts
// with sensitivity = the per-client point count, sums with sensitivity from
// the projected coordinate bound.
LshEncoding lsh_client_encode(const std::vector<Point>& points,
                              const LshPublic& pub,
                              const dp::PrivacyParams* privacy,
                              std::mt19937_64& rng);

// Nearest-reference assignment only (shared by the encoder and tests).
std::size_t nearest_ref(const Point& projected, const std::vector<Point>& refs);

struct DecodeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Buckets with noisy count >= min_count yield candidate means; weighted
// k-means over the candidates produces the final k centers. Throws
// DecodeFailure when no bucket passes.
ClusterModel lsh_server_decode(const std::vector<std::int64_t>& sum_hist,
                               const std::vector<std::vector<std::int64_t>>& sum_vecs,
                               std::int64_t min_count, unsigned k,
                               unsigned iters, std::uint64_t seed);

// Reference pipeline: pool all points into one encoding and decode, with no
// noise. The distributed path must match this bit-for-bit when noiseless.
ClusterModel central_lsh_pipeline(const std::vector<Point>& points,
                                  const LshPublic& pub, std::int64_t min_count,
                                  unsigned k, unsigned iters,
                                  std::uint64_t seed);

// Greedy one-to-one matching of centers to routine bases by ascending
// distance; accuracy = fraction of routine-type traces whose nearest center
// is the one matched to their routine.
double clustering_accuracy(const ClusterModel& model,
                           const TraceDataset& ground_truth);

// CSV export/import: one trace per row; ground-truth sidecar has columns
// type,routine_id.
void export_traces_csv(const TraceDataset& ds, const std::string& traces_path,
                       const std::string& truth_path);
TraceDataset import_traces_csv(const std::string& traces_path,
                               const std::string& truth_path);

}  // namespace privagg::traces
