#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "privagg/traces.hpp"

using namespace privagg;
using traces::ClusterModel;
using traces::Point;
using traces::TraceConfig;

namespace {

double dist2(const Point& a, const Point& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<Point> blob_data(const std::vector<Point>& centers,
                             std::size_t per_center, double std_dev,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, std_dev);
  std::vector<Point> out;
  for (const auto& c : centers)
    for (std::size_t i = 0; i < per_center; ++i) {
      Point p = c;
      for (auto& x : p) x = std::clamp(x + noise(rng), 0.0, 1.0);
      out.push_back(std::move(p));
    }
  return out;
}

}  // namespace

TEST_CASE("trace generation: shapes, ranges, determinism") {
  TraceConfig cfg;
  cfg.n_walks = 500;
  cfg.seed = 5;
  const auto ds = traces::generate_traces(cfg);
  REQUIRE(ds.traces.size() == 500);
  REQUIRE(ds.routine_of.size() == 500);
  REQUIRE(ds.routine_bases.size() == cfg.num_routines);
  for (const auto& t : ds.traces) {
    REQUIRE(t.size() == cfg.trace_len);
    for (const double v : t) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  const auto ds2 = traces::generate_traces(cfg);
  CHECK(ds2.traces == ds.traces);
  CHECK(ds2.routine_of == ds.routine_of);
}

TEST_CASE("trace generation: routine fraction is binomial-plausible") {
  TraceConfig cfg;
  cfg.n_walks = 4000;
  cfg.routine_fraction = 0.8;
  cfg.seed = 6;
  const auto ds = traces::generate_traces(cfg);
  std::size_t routine = 0;
  for (const int r : ds.routine_of) {
    CHECK(r >= -1);
    CHECK(r < static_cast<int>(cfg.num_routines));
    if (r >= 0) ++routine;
  }
  const double frac = static_cast<double>(routine) / 4000.0;
  CHECK(frac == doctest::Approx(0.8).epsilon(0.03));
}

TEST_CASE("zero perturbation: routine traces equal their base walk") {
  TraceConfig cfg;
  cfg.n_walks = 200;
  cfg.perturbation_std = 0.0;
  cfg.seed = 7;
  const auto ds = traces::generate_traces(cfg);
  for (std::size_t i = 0; i < ds.traces.size(); ++i) {
    if (ds.routine_of[i] < 0) continue;
    CHECK(ds.traces[i] == ds.routine_bases[ds.routine_of[i]]);
  }
}

TEST_CASE("kmeans: k distinct points give zero-cost optimum") {
  const std::vector<Point> pts{{0.1, 0.1}, {0.9, 0.1}, {0.5, 0.9}};
  const auto model = traces::kmeans_baseline(pts, 3, 10, 3);
  REQUIRE(model.centers.size() == 3);
  double worst = 1e9;
  for (const auto& p : pts) {
    double best = 1e9;
    for (const auto& c : model.centers) best = std::min(best, dist2(p, c));
    worst = std::min(worst, best);
    CHECK(best < 1e-18);
  }
  (void)worst;
}

TEST_CASE("kmeans: recovers well-separated blobs (oracle)") {
  std::mt19937_64 rng(11);
  const std::vector<Point> centers{{0.1, 0.1}, {0.9, 0.2}, {0.5, 0.9}};
  const auto data = blob_data(centers, 150, 0.02, rng);
  const auto model = traces::kmeans_baseline(data, 3, 20, 4);
  for (const auto& c : centers) {
    double best = 1e9;
    for (const auto& m : model.centers) best = std::min(best, dist2(c, m));
    CHECK(std::sqrt(best) < 0.05);
  }
}

TEST_CASE("weighted kmeans: weights shift the center") {
  const std::vector<Point> pts{{0.0}, {1.0}};
  const std::vector<double> w{3.0, 1.0};
  const auto model = traces::weighted_kmeans(pts, w, 1, 5, 1);
  REQUIRE(model.centers.size() == 1);
  CHECK(model.centers[0][0] == doctest::Approx(0.25));
  CHECK(model.weights[0] == doctest::Approx(4.0));
}

TEST_CASE("dp kmeans: huge epsilon matches plain kmeans closely") {
  std::mt19937_64 rng(13);
  const std::vector<Point> centers{{0.2, 0.2}, {0.8, 0.8}};
  const auto data = blob_data(centers, 200, 0.03, rng);
  const auto noisy = traces::dp_kmeans_central(data, 2, 1e7, 5, 21);
  const auto plain = traces::kmeans_baseline(data, 2, 5, 21);
  REQUIRE(noisy.centers.size() == plain.centers.size());
  for (const auto& c : plain.centers) {
    double best = 1e9;
    for (const auto& m : noisy.centers) best = std::min(best, dist2(c, m));
    CHECK(std::sqrt(best) < 0.01);
  }
}

TEST_CASE("dp kmeans centers stay inside the unit cube") {
  std::mt19937_64 rng(17);
  const auto data = blob_data({{0.5, 0.5}}, 50, 0.1, rng);
  const auto model = traces::dp_kmeans_central(data, 3, 0.05, 5, 2);
  for (const auto& c : model.centers)
    for (const double x : c) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
}

TEST_CASE("lsh public structures: shapes and determinism") {
  const auto pub = traces::make_lsh_public(24, 8, 64, 31);
  CHECK(pub.input_dim() == 24);
  CHECK(pub.proj_dim() == 8);
  CHECK(pub.refs.size() == 64);
  for (const auto& r : pub.refs) CHECK(r.size() == 8);
  const auto pub2 = traces::make_lsh_public(24, 8, 64, 31);
  CHECK(pub2.projection == pub.projection);
  CHECK(pub2.refs == pub.refs);
}

TEST_CASE("nearest_ref: brute force agreement and tie-break") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point> refs(16, Point(4));
  for (auto& r : refs)
    for (auto& x : r) x = u(rng);
  for (int trial = 0; trial < 200; ++trial) {
    Point p(4);
    for (auto& x : p) x = u(rng);
    const std::size_t got = traces::nearest_ref(p, refs);
    std::size_t best = 0;
    double best_d = dist2(p, refs[0]);
    for (std::size_t i = 1; i < refs.size(); ++i) {
      const double d = dist2(p, refs[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    CHECK(got == best);
  }
  // Exact tie: duplicated reference, lowest index wins.
  const std::vector<Point> tied{{1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}};
  CHECK(traces::nearest_ref({0.9, 0.0}, tied) == 0);
}

TEST_CASE("noiseless client encoding matches a hand-rolled oracle") {
  const auto pub = traces::make_lsh_public(6, 3, 8, 41);
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> pts(20, Point(6));
  for (auto& p : pts)
    for (auto& x : p) x = u(rng);

  std::mt19937_64 enc_rng(1);
  const auto enc = traces::lsh_client_encode(pts, pub, nullptr, enc_rng);

  traces::LshEncoding oracle(8, 3);
  for (const auto& p : pts) {
    Point proj(3, 0.0);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 6; ++c)
        proj[r] += pub.projection[r][c] * p[c];
    const std::size_t b = traces::nearest_ref(proj, pub.refs);
    oracle.assign_histogram[b] += 1;
    for (std::size_t r = 0; r < 3; ++r)
      oracle.bucket_sums[b][r] += static_cast<std::int64_t>(
          std::llround(proj[r] * traces::kFixedPointScale));
  }
  CHECK(enc.assign_histogram == oracle.assign_histogram);
  CHECK(enc.bucket_sums == oracle.bucket_sums);
}

TEST_CASE("lsh encodings add coordinatewise") {
  traces::LshEncoding a(3, 2), b(3, 2);
  a.assign_histogram = {1, 2, 3};
  a.bucket_sums = {{1, 1}, {2, 2}, {3, 3}};
  b.assign_histogram = {10, 0, -1};
  b.bucket_sums = {{5, 0}, {0, 5}, {-1, -1}};
  a += b;
  CHECK(a.assign_histogram == std::vector<std::int64_t>{11, 2, 2});
  CHECK(a.bucket_sums[0] == std::vector<std::int64_t>{6, 1});
  CHECK(a.bucket_sums[2] == std::vector<std::int64_t>{2, 2});
}

TEST_CASE("server decode: single bucket yields its mean") {
  const std::vector<std::int64_t> hist{4, 0};
  const std::vector<std::vector<std::int64_t>> sums{
      {4 * traces::kFixedPointScale, 2 * traces::kFixedPointScale}, {0, 0}};
  const auto model = traces::lsh_server_decode(hist, sums, 1, 1, 5, 3);
  REQUIRE(model.centers.size() == 1);
  CHECK(model.centers[0][0] == doctest::Approx(1.0));
  CHECK(model.centers[0][1] == doctest::Approx(0.5));
}

TEST_CASE("server decode: empty candidate set fails loudly") {
  const std::vector<std::int64_t> hist{0, 0};
  const std::vector<std::vector<std::int64_t>> sums{{0, 0}, {0, 0}};
  CHECK_THROWS_AS(traces::lsh_server_decode(hist, sums, 1, 2, 5, 3),
                  traces::DecodeFailure);
}

TEST_CASE("distributing points across clients matches pooling them") {
  const auto pub = traces::make_lsh_public(10, 4, 32, 47);
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point> all(60, Point(10));
  for (auto& p : all)
    for (auto& x : p) x = u(rng);

  std::mt19937_64 enc_rng(2);
  traces::LshEncoding combined(32, 4);
  for (std::size_t start = 0; start < 60; start += 12) {
    const std::vector<Point> chunk(all.begin() + start,
                                   all.begin() + start + 12);
    combined += traces::lsh_client_encode(chunk, pub, nullptr, enc_rng);
  }
  const auto pooled = traces::lsh_client_encode(all, pub, nullptr, enc_rng);
  CHECK(combined.assign_histogram == pooled.assign_histogram);
  CHECK(combined.bucket_sums == pooled.bucket_sums);
}

TEST_CASE("clustering accuracy: perfect and degenerate models") {
  TraceConfig cfg;
  cfg.n_walks = 300;
  cfg.perturbation_std = 0.0;
  cfg.seed = 9;
  const auto ds = traces::generate_traces(cfg);
  ClusterModel perfect;
  perfect.centers = ds.routine_bases;
  perfect.weights.assign(ds.routine_bases.size(), 1.0);
  CHECK(traces::clustering_accuracy(perfect, ds) == doctest::Approx(1.0));

  ClusterModel one_center;
  one_center.centers = {ds.routine_bases[0]};
  one_center.weights = {1.0};
  const double acc = traces::clustering_accuracy(one_center, ds);
  CHECK(acc > 0.0);
  CHECK(acc < 1.0);
}

TEST_CASE("csv export/import round-trips the dataset") {
  TraceConfig cfg;
  cfg.n_walks = 40;
  cfg.seed = 15;
  const auto ds = traces::generate_traces(cfg);
  const std::string tp = "/tmp/privagg_test_traces.csv";
  const std::string gp = "/tmp/privagg_test_truth.csv";
  traces::export_traces_csv(ds, tp, gp);
  const auto back = traces::import_traces_csv(tp, gp);
  REQUIRE(back.traces.size() == ds.traces.size());
  CHECK(back.routine_of == ds.routine_of);
  for (std::size_t i = 0; i < ds.traces.size(); ++i) {
    REQUIRE(back.traces[i].size() == ds.traces[i].size());
    for (std::size_t j = 0; j < ds.traces[i].size(); ++j)
      CHECK(back.traces[i][j] == doctest::Approx(ds.traces[i][j]).epsilon(1e-9));
  }
  std::remove(tp.c_str());
  std::remove(gp.c_str());
}

TEST_CASE("trace config validation") {
  TraceConfig bad;
  bad.num_labels = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TraceConfig bad_frac;
  bad_frac.routine_fraction = 1.5;
  CHECK_THROWS_AS(bad_frac.validate(), std::invalid_argument);
}
