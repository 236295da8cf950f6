#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "privagg/dpcore.hpp"
#include "privagg/secsum.hpp"
#include "privagg/traces.hpp"

namespace privagg::harness {

enum class TransportKind { InProcess, LoopbackTcp };

struct SimConfig {
  secsum::RoundConfig round;
  dp::PrivacyParams privacy;
  std::size_t num_labels = 10;
  double theta_sim = 0.0;  // injected dropout rate for this run
  TransportKind transport = TransportKind::InProcess;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty = no files written

  void validate() const;
};

// Table-1-style parameter presets; name is one of "table1-1e3", "table1-1e4",
// "table1-1e5".
secsum::RoundConfig preset_round_config(const std::string& name);

struct PublishedResult {
  int schema = 1;
  std::string round_id_hex;
  std::vector<std::string> labels;
  std::vector<std::int64_t> aggregate_counts;
  std::int64_t bt_aggregate = 0;
  std::uint32_t n_included = 0;
  double epsilon = 0;
  double theta = 0;
  std::uint64_t cap_c = 0;
  std::uint64_t cap_b = 0;
  std::string timestamp;

  bool operator==(const PublishedResult&) const = default;

  std::string to_json() const;
  static PublishedResult from_json(const std::string& text);
};

// Per-client label source; defaults to a seeded synthetic generator.
using LabelSource =
    std::function<dp::LocalHistogram(secsum::ClientId, std::mt19937_64&)>;

struct SimOutcome {
  PublishedResult result;
  secsum::RoundReport report;
  std::vector<std::int64_t> decoded;          // signed aggregate, L+1 coords
  std::vector<dp::LocalHistogram> clipped;    // per-client, after clipping
};

SimOutcome run_simulation(const SimConfig& config,
                          const LabelSource* source = nullptr);

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchRow {
  std::uint32_t users = 0;
  std::uint32_t neighbours = 0;  // mean realized degree
  double sharing_seconds = 0;    // median per-client share splitting
  double prg_seconds = 0;        // median per-client mask expansion
  double total_seconds = 0;      // full-round wall time; NaN when skipped
  std::uint64_t bytes_per_client = 0;
  bool low_confidence = false;   // single-sample timing
};

// Times the per-client primitives on real graph degrees and accounts exact
// wire bytes. A full round is only timed when run_full_round is set.
BenchRow bench_primitives(const secsum::RoundConfig& round,
                          unsigned repetitions, bool run_full_round = false);

std::string bench_table_csv(const std::vector<BenchRow>& rows);

// ---------------------------------------------------------------------------
// Distributed clustering

struct ClusteringParams {
  std::size_t proj_dim = 8;
  std::size_t num_refs = 64;
  std::int64_t min_count = 1;
  unsigned k = 5;
  unsigned iters = 10;
  double epsilon = 0;  // 0 disables per-cell noise
};

struct ClusterOutcome {
  traces::ClusterModel model;
  double accuracy = 0;
  unsigned secsum_rounds = 0;  // invocation counter; must be 2
  secsum::RoundReport hist_report;
  secsum::RoundReport vec_report;
};

// Clients encode their traces locally; exactly two secure-summation rounds
// aggregate the histogram and the bucket-sum vector; the server decodes the
// final centers.
ClusterOutcome run_distributed_clustering(const SimConfig& config,
                                          const traces::TraceConfig& tcfg,
                                          const ClusteringParams& params);

// ---------------------------------------------------------------------------
// Publishing

// Writes result.json, report.csv and aggregate.svg into output_dir.
void publish(const PublishedResult& result, const secsum::RoundReport& report,
             const std::string& output_dir);

// Serves GET /result.json and GET /healthz from output_dir until stopped.
class ResultServer {
 public:
  ResultServer(std::string output_dir, int port);
  ~ResultServer();
  ResultServer(const ResultServer&) = delete;
  ResultServer& operator=(const ResultServer&) = delete;

  int port() const { return port_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace privagg::harness
