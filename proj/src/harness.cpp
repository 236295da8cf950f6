#include "privagg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace privagg::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kValueBound = 1ULL << 40;

secsum::RoundId round_id_from_seed(std::uint64_t seed, const char* label) {
  crypto::Bytes buf(label, label + std::strlen(label));
  for (int i = 0; i < 8; ++i) buf.push_back((seed >> (8 * i)) & 0xff);
  const auto digest = crypto::sha256(buf);
  secsum::RoundId id{};
  std::copy_n(digest.begin(), 16, id.begin());
  return id;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (const auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

dp::LocalHistogram default_label_source(std::size_t num_labels,
                                        const dp::PrivacyParams& privacy,
                                        std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> label_count(0,
                                                           2 * privacy.cap_c);
  std::uniform_int_distribution<std::uint64_t> bt_count(0, 2 * privacy.cap_b);
  dp::LocalHistogram h;
  h.label_counts.resize(num_labels);
  for (auto& c : h.label_counts) c = label_count(rng);
  h.bt_device_count = bt_count(rng);
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::unique_ptr<secsum::Transport> make_transport(TransportKind kind) {
  if (kind == TransportKind::LoopbackTcp)
    return std::make_unique<secsum::LoopbackTcpTransport>();
  return std::make_unique<secsum::InProcessTransport>();
}

}  // namespace

void SimConfig::validate() const {
  round.validate();
  privacy.validate();
  if (num_labels == 0) throw std::invalid_argument("num_labels must be >= 1");
  if (theta_sim < 0 || theta_sim >= 1)
    throw std::invalid_argument("theta_sim must be in [0,1)");
  if (theta_sim > round.delta)
    std::fprintf(stderr,
                 "warning: theta_sim %.3f exceeds tolerated dropout fraction "
                 "delta %.3f\n",
                 theta_sim, round.delta);
}

secsum::RoundConfig preset_round_config(const std::string& name) {
  secsum::RoundConfig cfg;
  if (name == "table1-1e3") {
    cfg.n = 1000;
    cfg.k = 83;
  } else if (name == "table1-1e4") {
    cfg.n = 10000;
    cfg.k = 103;
  } else if (name == "table1-1e5") {
    cfg.n = 100000;
    cfg.k = 109;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  cfg.vec_len = 4096;
  return cfg;
}

std::string PublishedResult::to_json() const {
  json j;
  j["schema"] = schema;
  j["round_id"] = round_id_hex;
  j["labels"] = labels;
  j["aggregate_counts"] = aggregate_counts;
  j["bt_aggregate"] = bt_aggregate;
  j["n_included"] = n_included;
  j["epsilon"] = epsilon;
  j["theta"] = theta;
  j["cap_c"] = cap_c;
  j["cap_b"] = cap_b;
  j["timestamp"] = timestamp;
  return j.dump(2);
}

PublishedResult PublishedResult::from_json(const std::string& text) {
  const json j = json::parse(text);
  PublishedResult r;
  r.schema = j.at("schema").get<int>();
  r.round_id_hex = j.at("round_id").get<std::string>();
  r.labels = j.at("labels").get<std::vector<std::string>>();
  r.aggregate_counts =
      j.at("aggregate_counts").get<std::vector<std::int64_t>>();
  r.bt_aggregate = j.at("bt_aggregate").get<std::int64_t>();
  r.n_included = j.at("n_included").get<std::uint32_t>();
  r.epsilon = j.at("epsilon").get<double>();
  r.theta = j.at("theta").get<double>();
  r.cap_c = j.at("cap_c").get<std::uint64_t>();
  r.cap_b = j.at("cap_b").get<std::uint64_t>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

SimOutcome run_simulation(const SimConfig& config, const LabelSource* source) {
  SimConfig cfg = config;
  cfg.round.vec_len = cfg.num_labels + 1;
  cfg.round.theta = cfg.privacy.theta;
  if (std::all_of(cfg.round.round_id.begin(), cfg.round.round_id.end(),
                  [](std::uint8_t b) { return b == 0; }))
    cfg.round.round_id = round_id_from_seed(cfg.seed, "sim-round");
  cfg.validate();

  const std::uint32_t n = cfg.round.n;
  std::mt19937_64 seeder(cfg.seed);
  const std::uint64_t graph_seed = seeder();
  const std::uint64_t dropout_seed = seeder();
  const std::uint64_t round_seed = seeder();

  const fieldvec::EncodingParams enc{cfg.round.vec_len, kValueBound};

  std::vector<dp::LocalHistogram> clipped(n);
  std::vector<fieldvec::MaskVector> inputs(n);
  for (secsum::ClientId i = 0; i < n; ++i) {
    std::mt19937_64 rng(seeder());
    const dp::LocalHistogram raw =
        source ? (*source)(i, rng)
               : default_label_source(cfg.num_labels, cfg.privacy, rng);
    clipped[i] = dp::clip_histogram(raw, cfg.privacy);
    inputs[i] = dp::noise_and_encode(clipped[i], cfg.privacy, enc, rng);
  }

  const auto graph = secsum::NeighborGraph::build(n, cfg.round.k, graph_seed);
  const auto schedule =
      secsum::make_dropout_schedule(n, cfg.theta_sim, dropout_seed);
  auto transport = make_transport(cfg.transport);
  secsum::RoundResult round =
      secsum::server_run_round(cfg.round, graph, inputs, schedule, round_seed,
                               *transport);

  const std::uint64_t n_included =
      std::max<std::uint64_t>(1, round.report.included.size());
  const std::vector<std::int64_t> decoded =
      fieldvec::decode_sum(round.sum, enc, n_included);

  SimOutcome out;
  out.decoded = decoded;
  out.clipped = std::move(clipped);
  out.result.round_id_hex = hex(cfg.round.round_id);
  out.result.labels.reserve(cfg.num_labels);
  for (std::size_t i = 0; i < cfg.num_labels; ++i)
    out.result.labels.push_back("label_" + std::to_string(i));
  out.result.aggregate_counts.assign(decoded.begin(), decoded.end() - 1);
  out.result.bt_aggregate = decoded.back();
  out.result.n_included =
      static_cast<std::uint32_t>(round.report.included.size());
  out.result.epsilon = cfg.privacy.epsilon;
  out.result.theta = cfg.privacy.theta;
  out.result.cap_c = cfg.privacy.cap_c;
  out.result.cap_b = cfg.privacy.cap_b;
  out.result.timestamp = iso_timestamp();
  out.report = std::move(round.report);

  if (!cfg.output_dir.empty()) publish(out.result, out.report, cfg.output_dir);
  return out;
}

// ---------------------------------------------------------------------------
// Benchmarks

namespace {

// Exact wire-format byte totals for a client of the given degree in a
// dropout-free round.
std::uint64_t bytes_for_degree(std::size_t deg, std::size_t vec_len,
                               const secsum::RoundId& rid) {
  const auto frame_size = [&](const wire::Message& m) {
    return wire::serialize(m, rid).size();
  };

  wire::KeyAdvert advert{0, {}};
  wire::EncryptedShares shares;
  shares.client = 0;
  for (std::size_t i = 0; i < deg; ++i)
    shares.entries.push_back(
        {static_cast<wire::ClientId>(i + 1),
         crypto::Bytes(12 + 50 + 16, 0)});  // nonce + share pair + tag
  wire::MaskedInput masked{0, fieldvec::MaskVector(vec_len)};
  wire::UnmaskResponse response;
  response.client = 0;
  for (std::size_t i = 0; i < deg; ++i)
    response.entries.push_back({static_cast<wire::ClientId>(i + 1),
                                wire::ShareKind::SelfSeed,
                                {1, crypto::Bytes(16, 0)}});

  std::uint64_t sent = frame_size(advert) + frame_size(shares) +
                       frame_size(masked) + frame_size(response);

  wire::EncryptedShares fwd;
  fwd.client = 1;
  fwd.entries.push_back({0, crypto::Bytes(12 + 50 + 16, 0)});
  wire::UnmaskRequest request;
  for (std::size_t i = 0; i < deg + 1; ++i)
    request.survivor_set.push_back(static_cast<wire::ClientId>(i));
  std::uint64_t received = deg * frame_size(advert) + deg * frame_size(fwd) +
                           frame_size(request);
  return sent + received;
}

}  // namespace

BenchRow bench_primitives(const secsum::RoundConfig& round,
                          unsigned repetitions, bool run_full_round) {
  if (repetitions < 1)
    throw std::invalid_argument("bench: repetitions must be >= 1");
  secsum::RoundConfig cfg = round;
  cfg.validate();

  const std::uint64_t graph_seed = cfg.n * 1000003ULL + cfg.k;
  const auto graph = secsum::NeighborGraph::build(cfg.n, cfg.k, graph_seed);

  double degree_total = 0;
  for (secsum::ClientId i = 0; i < cfg.n; ++i)
    degree_total += static_cast<double>(graph.neighbors(i).size());
  const double mean_degree = degree_total / cfg.n;

  // Sample a handful of clients spread over the id space.
  std::vector<secsum::ClientId> sample;
  const std::size_t n_samples = std::min<std::size_t>(8, cfg.n);
  for (std::size_t s = 0; s < n_samples; ++s)
    sample.push_back(static_cast<secsum::ClientId>(s * (cfg.n / n_samples)));

  std::mt19937_64 rng(graph_seed ^ 0xabcdef);
  std::vector<double> sharing_samples, prg_samples;
  crypto::Key32 key_secret{};
  crypto::Seed16 seed_secret{};
  for (unsigned rep = 0; rep < repetitions; ++rep) {
    for (const secsum::ClientId c : sample) {
      const unsigned deg =
          static_cast<unsigned>(graph.neighbors(c).size());
      if (deg == 0) continue;
      const unsigned t =
          cfg.t > 0 ? cfg.t : static_cast<unsigned>((2 * deg + 2) / 3);

      auto start = Clock::now();
      (void)shamir::split(key_secret, t, deg, rng);
      (void)shamir::split(seed_secret, t, deg, rng);
      sharing_samples.push_back(
          std::chrono::duration<double>(Clock::now() - start).count());

      start = Clock::now();
      for (unsigned j = 0; j <= deg; ++j) {
        crypto::Seed16 s{};
        s[0] = static_cast<std::uint8_t>(j);
        (void)fieldvec::prg_expand(s, seed_secret, cfg.vec_len);
      }
      prg_samples.push_back(
          std::chrono::duration<double>(Clock::now() - start).count());
    }
  }

  BenchRow row;
  row.users = cfg.n;
  row.neighbours = static_cast<std::uint32_t>(std::lround(mean_degree));
  row.sharing_seconds = median(sharing_samples);
  row.prg_seconds = median(prg_samples);
  row.bytes_per_client = bytes_for_degree(
      static_cast<std::size_t>(std::lround(mean_degree)), cfg.vec_len,
      cfg.round_id);
  row.low_confidence = repetitions == 1;
  row.total_seconds = std::numeric_limits<double>::quiet_NaN();

  if (run_full_round) {
    std::vector<fieldvec::MaskVector> inputs(
        cfg.n, fieldvec::MaskVector(cfg.vec_len));
    secsum::DropoutSchedule none(cfg.n, secsum::DropPhase::None);
    secsum::InProcessTransport transport;
    const auto start = Clock::now();
    (void)secsum::server_run_round(cfg, graph, inputs, none, graph_seed,
                                   transport);
    row.total_seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
  }
  return row;
}

std::string bench_table_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "users,neighbours,sharing_s,prg_s,total_s,bytes_per_client,"
         "low_confidence\n";
  for (const auto& r : rows) {
    out << r.users << "," << r.neighbours << "," << r.sharing_seconds << ","
        << r.prg_seconds << ",";
    if (std::isnan(r.total_seconds))
      out << "-";
    else
      out << r.total_seconds;
    out << "," << r.bytes_per_client << "," << (r.low_confidence ? 1 : 0)
        << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Distributed clustering

ClusterOutcome run_distributed_clustering(const SimConfig& config,
                                          const traces::TraceConfig& tcfg_in,
                                          const ClusteringParams& params) {
  SimConfig cfg = config;
  traces::TraceConfig tcfg = tcfg_in;
  tcfg.n_walks = cfg.round.n;  // one trace per client
  tcfg.seed = cfg.seed;
  tcfg.validate();

  const traces::TraceDataset ds = traces::generate_traces(tcfg);
  const traces::LshPublic pub = traces::make_lsh_public(
      tcfg.trace_len, params.proj_dim, params.num_refs, cfg.seed ^ 0x15a4e5);

  const std::uint32_t n = cfg.round.n;
  const std::size_t m = params.num_refs;
  const std::size_t dprime = params.proj_dim;

  dp::PrivacyParams cell_privacy;
  cell_privacy.epsilon = params.epsilon > 0 ? params.epsilon : 1.0;
  cell_privacy.theta = cfg.theta_sim;
  cell_privacy.cap_c = 1;  // one trace per client
  cell_privacy.cap_b = 1;
  const bool noised = params.epsilon > 0;

  std::mt19937_64 seeder(cfg.seed ^ 0xc1u);
  std::vector<traces::LshEncoding> encodings;
  encodings.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(seeder());
    encodings.push_back(traces::lsh_client_encode(
        {ds.traces[i]}, pub, noised ? &cell_privacy : nullptr, rng));
  }

  const fieldvec::EncodingParams hist_enc{m, kValueBound};
  const fieldvec::EncodingParams vec_enc{m * dprime, kValueBound};

  std::vector<fieldvec::MaskVector> hist_inputs, vec_inputs;
  hist_inputs.reserve(n);
  vec_inputs.reserve(n);
  for (const auto& e : encodings) {
    hist_inputs.push_back(fieldvec::encode_counts(e.assign_histogram,
                                                  hist_enc));
    std::vector<std::int64_t> flat;
    flat.reserve(m * dprime);
    for (const auto& row : e.bucket_sums)
      flat.insert(flat.end(), row.begin(), row.end());
    vec_inputs.push_back(fieldvec::encode_counts(flat, vec_enc));
  }

  const std::uint64_t graph_seed = seeder();
  const auto graph = secsum::NeighborGraph::build(n, cfg.round.k, graph_seed);
  const auto schedule =
      secsum::make_dropout_schedule(n, cfg.theta_sim, seeder());
  auto transport = make_transport(cfg.transport);

  ClusterOutcome out;

  secsum::RoundConfig hist_round = cfg.round;
  hist_round.vec_len = m;
  hist_round.round_id = round_id_from_seed(cfg.seed, "cluster-hist");
  auto hist_res = secsum::server_run_round(hist_round, graph, hist_inputs,
                                           schedule, seeder(), *transport);
  ++out.secsum_rounds;

  secsum::RoundConfig vec_round = cfg.round;
  vec_round.vec_len = m * dprime;
  vec_round.round_id = round_id_from_seed(cfg.seed, "cluster-vec");
  auto vec_res = secsum::server_run_round(vec_round, graph, vec_inputs,
                                          schedule, seeder(), *transport);
  ++out.secsum_rounds;

  const std::uint64_t n_inc =
      std::max<std::uint64_t>(1, hist_res.report.included.size());
  const std::vector<std::int64_t> hist =
      fieldvec::decode_sum(hist_res.sum, hist_enc, n_inc);
  const std::vector<std::int64_t> flat_vec =
      fieldvec::decode_sum(vec_res.sum, vec_enc, n_inc);
  std::vector<std::vector<std::int64_t>> sums(m,
                                              std::vector<std::int64_t>(dprime));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t d = 0; d < dprime; ++d)
      sums[r][d] = flat_vec[r * dprime + d];

  out.model = traces::lsh_server_decode(hist, sums, params.min_count, params.k,
                                        params.iters, cfg.seed ^ 0xdecade);
  out.accuracy = traces::clustering_accuracy(out.model, ds);
  out.hist_report = std::move(hist_res.report);
  out.vec_report = std::move(vec_res.report);
  return out;
}

// ---------------------------------------------------------------------------
// Publishing

void publish(const PublishedResult& result, const secsum::RoundReport& report,
             const std::string& output_dir) {
  fs::create_directories(output_dir);
  {
    std::ofstream f(fs::path(output_dir) / "result.json",
                    std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write result.json");
    f << result.to_json();
  }
  {
    std::ofstream f(fs::path(output_dir) / "report.csv", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write report.csv");
    f << "client,bytes_sent,bytes_received\n";
    for (std::size_t i = 0; i < report.bytes_sent.size(); ++i)
      f << i << "," << report.bytes_sent[i] << "," << report.bytes_received[i]
        << "\n";
    f << "\nphase,seconds\n";
    f << "keys," << report.keys_seconds << "\n";
    f << "shares," << report.shares_seconds << "\n";
    f << "mask," << report.mask_seconds << "\n";
    f << "unmask," << report.unmask_seconds << "\n";
    f << "sharing," << report.sharing_seconds << "\n";
    f << "prg," << report.prg_seconds << "\n";
    f << "total," << report.total_seconds << "\n";
  }
  {
    // Minimal bar chart of the published aggregate.
    std::ofstream f(fs::path(output_dir) / "aggregate.svg", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write aggregate.svg");
    const std::size_t nbars = result.aggregate_counts.size();
    const int width = 40, gap = 10, h = 240;
    std::int64_t peak = 1;
    for (const auto c : result.aggregate_counts)
      peak = std::max(peak, std::max<std::int64_t>(c, 1));
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\""
      << nbars * (width + gap) + gap << "\" height=\"" << h + 40 << "\">\n";
    for (std::size_t i = 0; i < nbars; ++i) {
      const double frac =
          std::max<double>(0.0, static_cast<double>(result.aggregate_counts[i])) /
          static_cast<double>(peak);
      const int bar_h = static_cast<int>(frac * h);
      f << "  <rect x=\"" << gap + i * (width + gap) << "\" y=\""
        << h - bar_h + 10 << "\" width=\"" << width << "\" height=\"" << bar_h
        << "\" fill=\"#4477aa\"/>\n";
    }
    f << "</svg>\n";
  }
}

struct ResultServer::Impl {
  httplib::Server server;
  std::thread thread;
};

ResultServer::ResultServer(std::string output_dir, int port)
    : impl_(std::make_unique<Impl>()) {
  const fs::path dir(output_dir);
  impl_->server.Get("/result.json",
                    [dir](const httplib::Request&, httplib::Response& res) {
                      std::ifstream f(dir / "result.json", std::ios::binary);
                      if (!f) {
                        res.status = 404;
                        return;
                      }
                      std::stringstream ss;
                      ss << f.rdbuf();
                      res.set_content(ss.str(), "application/json");
                    });
  impl_->server.Get("/healthz",
                    [](const httplib::Request&, httplib::Response& res) {
                      res.set_content("ok", "text/plain");
                    });

  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ < 0) throw std::runtime_error("cannot bind server port");
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port))
      throw std::runtime_error("port in use: " + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void ResultServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

ResultServer::~ResultServer() { stop(); }

}  // namespace privagg::harness
