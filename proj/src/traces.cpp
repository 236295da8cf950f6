#include "privagg/traces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace privagg::traces {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

Point random_walk(unsigned num_labels, unsigned trace_len,
                  std::mt19937_64& rng) {
  std::uniform_int_distribution<int> start(0, static_cast<int>(num_labels) - 1);
  std::uniform_int_distribution<int> step(-1, 1);
  const double denom = num_labels > 1 ? num_labels - 1.0 : 1.0;
  int label = start(rng);
  Point out(trace_len);
  for (unsigned s = 0; s < trace_len; ++s) {
    out[s] = label / denom;
    label = std::clamp(label + step(rng), 0,
                       static_cast<int>(num_labels) - 1);
  }
  return out;
}

double sq_dist(const Point& a, const Point& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

double continuous_laplace(double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(
      -0.5 + std::numeric_limits<double>::epsilon(), 0.5);
  const double u = uni(rng);
  return -scale * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::fabs(u));
}

std::vector<Point> kmeanspp_seed(const std::vector<Point>& points,
                                 const std::vector<double>& weights,
                                 unsigned k, std::mt19937_64& rng) {
  std::vector<Point> centers;
  std::vector<double> d2(points.size(),
                         std::numeric_limits<double>::infinity());
  std::discrete_distribution<std::size_t> first(weights.begin(),
                                                weights.end());
  centers.push_back(points[first(rng)]);
  while (centers.size() < k) {
    std::vector<double> probs(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
      probs[i] = weights[i] * d2[i];
    }
    double total = 0;
    for (const double p : probs) total += p;
    if (total <= 0) {
      // all mass already covered; reuse an arbitrary point
      centers.push_back(points[centers.size() % points.size()]);
      continue;
    }
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    centers.push_back(points[pick(rng)]);
  }
  return centers;
}

std::size_t nearest_center(const Point& p, const std::vector<Point>& centers) {
  std::size_t best = 0;
  double best_d = sq_dist(p, centers[0]);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = sq_dist(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

void TraceConfig::validate() const {
  if (num_labels < 1) throw std::invalid_argument("num_labels must be >= 1");
  if (trace_len < 1) throw std::invalid_argument("trace_len must be >= 1");
  if (num_routines < 1) throw std::invalid_argument("num_routines must be >= 1");
  if (routine_fraction <= 0 || routine_fraction > 1)
    throw std::invalid_argument("routine_fraction must be in (0,1]");
  if (perturbation_std < 0)
    throw std::invalid_argument("perturbation_std must be >= 0");
}

TraceDataset generate_traces(const TraceConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  TraceDataset ds;
  ds.routine_bases.reserve(config.num_routines);
  for (unsigned r = 0; r < config.num_routines; ++r)
    ds.routine_bases.push_back(
        random_walk(config.num_labels, config.trace_len, rng));

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick_routine(
      0, static_cast<int>(config.num_routines) - 1);
  std::normal_distribution<double> perturb(0.0, 1.0);

  ds.traces.reserve(config.n_walks);
  ds.routine_of.reserve(config.n_walks);
  for (std::size_t i = 0; i < config.n_walks; ++i) {
    if (coin(rng) < config.routine_fraction) {
      const int r = pick_routine(rng);
      Point t = ds.routine_bases[r];
      if (config.perturbation_std > 0)
        for (auto& v : t)
          v = clamp01(v + config.perturbation_std * perturb(rng));
      ds.traces.push_back(std::move(t));
      ds.routine_of.push_back(r);
    } else {
      ds.traces.push_back(
          random_walk(config.num_labels, config.trace_len, rng));
      ds.routine_of.push_back(-1);
    }
  }
  return ds;
}

ClusterModel weighted_kmeans(const std::vector<Point>& points,
                             const std::vector<double>& weights, unsigned k,
                             unsigned iters, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("kmeans: empty data");
  if (k < 1 || k > points.size())
    throw std::invalid_argument("kmeans: need 1 <= k <= |data|");
  if (weights.size() != points.size())
    throw std::invalid_argument("kmeans: weight count mismatch");

  std::mt19937_64 rng(seed);
  std::vector<Point> centers = kmeanspp_seed(points, weights, k, rng);
  const std::size_t dim = points[0].size();

  std::vector<std::size_t> assign(points.size());
  for (unsigned it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < points.size(); ++i)
      assign[i] = nearest_center(points[i], centers);
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<double> mass(k, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      mass[assign[i]] += weights[i];
      for (std::size_t d = 0; d < dim; ++d)
        sums[assign[i]][d] += weights[i] * points[i][d];
    }
    bool moved = false;
    for (unsigned c = 0; c < k; ++c) {
      if (mass[c] <= 0) continue;  // keep the previous center
      Point updated(dim);
      for (std::size_t d = 0; d < dim; ++d) updated[d] = sums[c][d] / mass[c];
      if (updated != centers[c]) moved = true;
      centers[c] = std::move(updated);
    }
    if (!moved) break;
  }

  ClusterModel model;
  model.centers = std::move(centers);
  model.weights.assign(k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i)
    model.weights[nearest_center(points[i], model.centers)] += weights[i];
  return model;
}

ClusterModel kmeans_baseline(const std::vector<Point>& data, unsigned k,
                             unsigned iters, std::uint64_t seed) {
  return weighted_kmeans(data, std::vector<double>(data.size(), 1.0), k, iters,
                         seed);
}

ClusterModel dp_kmeans_central(const std::vector<Point>& data, unsigned k,
                               double epsilon, unsigned iters,
                               std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("dp_kmeans: empty data");
  if (!(epsilon > 0)) throw std::invalid_argument("dp_kmeans: epsilon <= 0");
  if (iters < 1) throw std::invalid_argument("dp_kmeans: iters must be >= 1");
  const std::size_t dim = data[0].size();
  for (const auto& p : data)
    for (const double v : p)
      if (v < 0 || v > 1)
        throw std::invalid_argument("dp_kmeans: data outside [0,1]^d");

  std::mt19937_64 init_rng(seed);
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const std::vector<double> unit(data.size(), 1.0);
  std::vector<Point> centers = kmeanspp_seed(data, unit, k, init_rng);

  const double eps_iter = epsilon / iters;
  const double count_scale = 1.0 / (eps_iter / 2.0);
  const double sum_scale = static_cast<double>(dim) / (eps_iter / 2.0);

  std::vector<double> noisy_counts(k, 0.0);
  for (unsigned it = 0; it < iters; ++it) {
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<double> counts(k, 0.0);
    for (const auto& p : data) {
      const std::size_t c = nearest_center(p, centers);
      counts[c] += 1.0;
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += p[d];
    }
    for (unsigned c = 0; c < k; ++c) {
      noisy_counts[c] =
          counts[c] + static_cast<double>(
                          dp::sample_discrete_laplace(count_scale, noise_rng));
      const double denom = std::max(noisy_counts[c], 1.0);
      for (std::size_t d = 0; d < dim; ++d) {
        const double noisy_sum =
            sums[c][d] + continuous_laplace(sum_scale, noise_rng);
        centers[c][d] = clamp01(noisy_sum / denom);
      }
    }
  }

  ClusterModel model;
  model.centers = std::move(centers);
  model.weights.resize(k);
  for (unsigned c = 0; c < k; ++c)
    model.weights[c] = std::max(0.0, noisy_counts[c]);
  return model;
}

LshPublic make_lsh_public(std::size_t dim, std::size_t proj_dim,
                          std::size_t num_refs, std::uint64_t seed) {
  if (dim == 0 || proj_dim == 0 || num_refs == 0)
    throw std::invalid_argument("make_lsh_public: zero dimension");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(proj_dim));

  LshPublic pub;
  pub.projection.assign(proj_dim, Point(dim));
  for (auto& row : pub.projection)
    for (auto& v : row) v = gauss(rng) * inv_sqrt;

  // Reference points: projections of uniform samples from the input cube.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  pub.refs.reserve(num_refs);
  for (std::size_t r = 0; r < num_refs; ++r) {
    Point x(dim);
    for (auto& v : x) v = uni(rng);
    Point proj(proj_dim, 0.0);
    for (std::size_t i = 0; i < proj_dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        proj[i] += pub.projection[i][j] * x[j];
    pub.refs.push_back(std::move(proj));
  }
  return pub;
}

LshEncoding& LshEncoding::operator+=(const LshEncoding& other) {
  if (assign_histogram.size() != other.assign_histogram.size())
    throw std::invalid_argument("LshEncoding size mismatch");
  for (std::size_t i = 0; i < assign_histogram.size(); ++i) {
    assign_histogram[i] += other.assign_histogram[i];
    for (std::size_t d = 0; d < bucket_sums[i].size(); ++d)
      bucket_sums[i][d] += other.bucket_sums[i][d];
  }
  return *this;
}

std::size_t nearest_ref(const Point& projected,
                        const std::vector<Point>& refs) {
  std::size_t best = 0;
  double best_d = sq_dist(projected, refs[0]);
  for (std::size_t r = 1; r < refs.size(); ++r) {
    const double d = sq_dist(projected, refs[r]);
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = r;
    }
  }
  return best;
}

LshEncoding lsh_client_encode(const std::vector<Point>& points,
                              const LshPublic& pub,
                              const dp::PrivacyParams* privacy,
                              std::mt19937_64& rng) {
  const std::size_t d = pub.input_dim();
  const std::size_t dp_ = pub.proj_dim();
  const std::size_t m = pub.refs.size();
  LshEncoding enc(m, dp_);

  for (const auto& x : points) {
    if (x.size() != d)
      throw std::invalid_argument("lsh_client_encode: dimension mismatch");
    Point proj(dp_, 0.0);
    for (std::size_t i = 0; i < dp_; ++i)
      for (std::size_t j = 0; j < d; ++j) proj[i] += pub.projection[i][j] * x[j];
    const std::size_t r = nearest_ref(proj, pub.refs);
    enc.assign_histogram[r] += 1;
    for (std::size_t i = 0; i < dp_; ++i)
      enc.bucket_sums[r][i] +=
          std::llround(proj[i] * static_cast<double>(kFixedPointScale));
  }

  if (privacy) {
    privacy->validate();
    // Budget split evenly between the two secure-summation structures.
    const double eps_half = privacy->epsilon / 2.0;
    const double comp = 1.0 - privacy->theta;
    const double count_cap = static_cast<double>(privacy->cap_c);
    const double count_scale = count_cap / (eps_half * comp);
    // Projected coordinates are bounded by sqrt(d) with overwhelming
    // probability for the scaled Gaussian projection of [0,1]^d.
    const double coord_bound = std::sqrt(static_cast<double>(d));
    const double sum_scale = count_cap * coord_bound *
                             static_cast<double>(kFixedPointScale) /
                             (eps_half * comp);
    for (std::size_t r = 0; r < m; ++r) {
      enc.assign_histogram[r] += dp::sample_discrete_laplace(count_scale, rng);
      for (std::size_t i = 0; i < dp_; ++i)
        enc.bucket_sums[r][i] += dp::sample_discrete_laplace(sum_scale, rng);
    }
  }
  return enc;
}

ClusterModel lsh_server_decode(
    const std::vector<std::int64_t>& sum_hist,
    const std::vector<std::vector<std::int64_t>>& sum_vecs,
    std::int64_t min_count, unsigned k, unsigned iters, std::uint64_t seed) {
  if (sum_hist.size() != sum_vecs.size())
    throw std::invalid_argument("lsh_server_decode: size mismatch");

  std::vector<Point> candidates;
  std::vector<double> weights;
  for (std::size_t r = 0; r < sum_hist.size(); ++r) {
    if (sum_hist[r] < min_count) continue;
    Point mean(sum_vecs[r].size());
    for (std::size_t d = 0; d < mean.size(); ++d)
      mean[d] = static_cast<double>(sum_vecs[r][d]) /
                (static_cast<double>(sum_hist[r]) *
                 static_cast<double>(kFixedPointScale));
    candidates.push_back(std::move(mean));
    weights.push_back(static_cast<double>(sum_hist[r]));
  }
  if (candidates.empty())
    throw DecodeFailure("lsh_server_decode: no bucket reaches min_count");

  const unsigned k_eff =
      std::min<unsigned>(k, static_cast<unsigned>(candidates.size()));
  return weighted_kmeans(candidates, weights, k_eff, iters, seed);
}

ClusterModel central_lsh_pipeline(const std::vector<Point>& points,
                                  const LshPublic& pub,
                                  std::int64_t min_count, unsigned k,
                                  unsigned iters, std::uint64_t seed) {
  std::mt19937_64 rng(0);  // unused without privacy
  const LshEncoding pooled = lsh_client_encode(points, pub, nullptr, rng);
  return lsh_server_decode(pooled.assign_histogram, pooled.bucket_sums,
                           min_count, k, iters, seed);
}

double clustering_accuracy(const ClusterModel& model,
                           const TraceDataset& ground_truth) {
  if (model.centers.empty())
    throw std::invalid_argument("clustering_accuracy: no centers");
  std::size_t routine_traces = 0;
  for (const int r : ground_truth.routine_of)
    if (r >= 0) ++routine_traces;
  if (routine_traces == 0)
    throw std::invalid_argument("clustering_accuracy: no routine traces");

  const std::size_t R = ground_truth.routine_bases.size();
  const std::size_t K = model.centers.size();

  // Greedy one-to-one matching by ascending center-to-routine distance.
  struct Pair {
    double d;
    std::size_t center, routine;
  };
  std::vector<Pair> pairs;
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t r = 0; r < R; ++r)
      pairs.push_back({sq_dist(model.centers[c], ground_truth.routine_bases[r]),
                       c, r});
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.d < b.d; });
  std::vector<int> matched_center(R, -1);
  std::vector<bool> center_used(K, false);
  for (const auto& p : pairs) {
    if (center_used[p.center] || matched_center[p.routine] >= 0) continue;
    matched_center[p.routine] = static_cast<int>(p.center);
    center_used[p.center] = true;
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < ground_truth.traces.size(); ++i) {
    const int r = ground_truth.routine_of[i];
    if (r < 0) continue;
    const std::size_t nearest =
        nearest_center(ground_truth.traces[i], model.centers);
    if (matched_center[r] >= 0 &&
        nearest == static_cast<std::size_t>(matched_center[r]))
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(routine_traces);
}

void export_traces_csv(const TraceDataset& ds, const std::string& traces_path,
                       const std::string& truth_path) {
  std::ofstream tf(traces_path);
  if (!tf) throw std::runtime_error("cannot write " + traces_path);
  tf.precision(17);
  for (const auto& t : ds.traces) {
    for (std::size_t i = 0; i < t.size(); ++i)
      tf << (i ? "," : "") << t[i];
    tf << "\n";
  }

  std::ofstream gf(truth_path);
  if (!gf) throw std::runtime_error("cannot write " + truth_path);
  gf << "type,routine_id\n";
  for (const int r : ds.routine_of)
    gf << (r >= 0 ? "routine" : "noise") << "," << r << "\n";
}

TraceDataset import_traces_csv(const std::string& traces_path,
                               const std::string& truth_path) {
  TraceDataset ds;
  std::ifstream tf(traces_path);
  if (!tf) throw std::runtime_error("cannot read " + traces_path);
  std::string line;
  while (std::getline(tf, line)) {
    if (line.empty()) continue;
    Point t;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.push_back(std::stod(cell));
    ds.traces.push_back(std::move(t));
  }

  std::ifstream gf(truth_path);
  if (!gf) throw std::runtime_error("cannot read " + truth_path);
  std::getline(gf, line);  // header
  while (std::getline(gf, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    ds.routine_of.push_back(std::stoi(line.substr(comma + 1)));
  }
  return ds;
}

}  // namespace privagg::traces
