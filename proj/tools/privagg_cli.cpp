// Command-line front end for the aggregation toolchain: simulation,
// primitive benchmarks, distributed clustering, publishing and serving.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "privagg/harness.hpp"

namespace {

using privagg::harness::SimConfig;
using privagg::harness::TransportKind;

void apply_config_file(const std::string& path, SimConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw CLI::ValidationError("config", "cannot read " + path);
  nlohmann::json j;
  f >> j;
  if (j.contains("clients")) cfg.round.n = j["clients"].get<std::uint32_t>();
  if (j.contains("degree")) cfg.round.k = j["degree"].get<std::uint32_t>();
  if (j.contains("threshold")) cfg.round.t = j["threshold"].get<std::uint32_t>();
  if (j.contains("labels")) cfg.num_labels = j["labels"].get<std::size_t>();
  if (j.contains("epsilon")) cfg.privacy.epsilon = j["epsilon"].get<double>();
  if (j.contains("theta")) cfg.privacy.theta = j["theta"].get<double>();
  if (j.contains("cap_c")) cfg.privacy.cap_c = j["cap_c"].get<std::uint64_t>();
  if (j.contains("cap_b")) cfg.privacy.cap_b = j["cap_b"].get<std::uint64_t>();
  if (j.contains("theta_sim")) cfg.theta_sim = j["theta_sim"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir"))
    cfg.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("transport"))
    cfg.transport = j["transport"].get<std::string>() == "loopback_tcp"
                        ? TransportKind::LoopbackTcp
                        : TransportKind::InProcess;
}

void add_round_options(CLI::App* app, SimConfig& cfg, std::string& preset,
                       std::string& config_file, std::string& transport) {
  app->add_option("--config", config_file, "JSON config file");
  app->add_option("--preset", preset,
                  "parameter preset: table1-1e3|table1-1e4|table1-1e5");
  app->add_option("-n,--clients", cfg.round.n, "number of clients");
  app->add_option("-k,--degree", cfg.round.k, "neighbor graph degree target");
  app->add_option("-t,--threshold", cfg.round.t,
                  "reconstruction threshold (0 = per-client default)");
  app->add_option("--epsilon", cfg.privacy.epsilon, "privacy budget");
  app->add_option("--theta", cfg.privacy.theta,
                  "expected dropout fraction for noise scaling");
  app->add_option("--theta-sim", cfg.theta_sim, "injected dropout rate");
  app->add_option("--seed", cfg.seed, "simulation seed");
  app->add_option("--out", cfg.output_dir, "output directory");
  app->add_option("--transport", transport,
                  "in_process (default) or loopback_tcp");
}

void finalize_config(SimConfig& cfg, const std::string& preset,
                     const std::string& config_file,
                     const std::string& transport) {
  if (!config_file.empty()) apply_config_file(config_file, cfg);
  if (!preset.empty()) {
    const auto p = privagg::harness::preset_round_config(preset);
    cfg.round.n = p.n;
    cfg.round.k = p.k;
  }
  if (transport == "loopback_tcp")
    cfg.transport = TransportKind::LoopbackTcp;
  else if (!transport.empty() && transport != "in_process")
    throw CLI::ValidationError("transport", "unknown transport " + transport);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving distributed histogram aggregation"};
  app.require_subcommand(1);

  SimConfig cfg;
  cfg.round.n = 100;
  cfg.round.k = 20;
  cfg.output_dir = "out";
  std::string preset, config_file, transport;

  // simulate
  auto* sim = app.add_subcommand("simulate", "run one aggregation round");
  add_round_options(sim, cfg, preset, config_file, transport);
  sim->add_option("--labels", cfg.num_labels, "number of environment labels");
  sim->add_option("--cap-c", cfg.privacy.cap_c, "per-label count cap");
  sim->add_option("--cap-b", cfg.privacy.cap_b, "device count cap");

  // bench
  auto* bench = app.add_subcommand("bench", "time primitives per client");
  std::vector<std::string> bench_presets;
  unsigned reps = 10;
  std::size_t bench_vec_len = 4096;
  bool full_round = false;
  std::uint32_t bench_n = 0, bench_k = 0;
  bench->add_option("--preset", bench_presets,
                    "preset rows (repeatable): table1-1e3|table1-1e4|table1-1e5");
  bench->add_option("-n,--clients", bench_n, "custom row: clients");
  bench->add_option("-k,--degree", bench_k, "custom row: degree");
  bench->add_option("--reps", reps, "timing repetitions");
  bench->add_option("--vec-len", bench_vec_len, "mask vector length");
  bench->add_flag("--full-round", full_round, "also time a full round");

  // cluster
  auto* cluster =
      app.add_subcommand("cluster", "one-round distributed clustering");
  add_round_options(cluster, cfg, preset, config_file, transport);
  privagg::traces::TraceConfig tcfg;
  privagg::harness::ClusteringParams cparams;
  cluster->add_option("--trace-labels", tcfg.num_labels, "label alphabet size");
  cluster->add_option("--trace-len", tcfg.trace_len, "steps per trace");
  cluster->add_option("--routines", tcfg.num_routines, "number of routines");
  cluster->add_option("--routine-fraction", tcfg.routine_fraction,
                      "fraction of routine traces");
  cluster->add_option("--perturbation-std", tcfg.perturbation_std,
                      "routine perturbation std");
  cluster->add_option("--proj-dim", cparams.proj_dim, "projected dimension");
  cluster->add_option("--refs", cparams.num_refs, "reference point count");
  cluster->add_option("--min-count", cparams.min_count,
                      "bucket count threshold");
  cluster->add_option("--centers", cparams.k, "cluster count");
  cluster->add_option("--iters", cparams.iters, "k-means iterations");
  cluster->add_option("--cell-epsilon", cparams.epsilon,
                      "per-cell noise budget (0 = off)");

  // publish
  auto* pub = app.add_subcommand("publish", "validate and emit result files");
  std::string pub_result, pub_out = "out";
  pub->add_option("--result", pub_result, "existing result.json")->required();
  pub->add_option("--out", pub_out, "output directory");

  // serve
  auto* serve = app.add_subcommand("serve", "serve result.json over HTTP");
  std::string serve_dir = "out";
  int serve_port = 8080;
  serve->add_option("--dir", serve_dir, "directory holding result.json");
  serve->add_option("--port", serve_port, "listen port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      finalize_config(cfg, preset, config_file, transport);
      const auto outcome = privagg::harness::run_simulation(cfg);
      std::cout << outcome.result.to_json() << "\n";
      std::cerr << "included " << outcome.report.included.size() << "/"
                << cfg.round.n << " clients, total "
                << outcome.report.total_seconds << " s\n";
    } else if (bench->parsed()) {
      std::vector<privagg::harness::BenchRow> rows;
      for (const auto& p : bench_presets) {
        auto rc = privagg::harness::preset_round_config(p);
        rc.vec_len = bench_vec_len;
        rows.push_back(
            privagg::harness::bench_primitives(rc, reps, full_round));
      }
      if (bench_n > 0) {
        privagg::secsum::RoundConfig rc;
        rc.n = bench_n;
        rc.k = bench_k;
        rc.vec_len = bench_vec_len;
        rows.push_back(
            privagg::harness::bench_primitives(rc, reps, full_round));
      }
      if (rows.empty())
        throw CLI::ValidationError("bench", "no rows selected");
      std::cout << privagg::harness::bench_table_csv(rows);
    } else if (cluster->parsed()) {
      finalize_config(cfg, preset, config_file, transport);
      const auto outcome =
          privagg::harness::run_distributed_clustering(cfg, tcfg, cparams);
      std::cout << "secsum_rounds " << outcome.secsum_rounds << "\n";
      std::cout << "accuracy " << outcome.accuracy << "\n";
      for (std::size_t c = 0; c < outcome.model.centers.size(); ++c) {
        std::cout << "center " << c << " weight " << outcome.model.weights[c]
                  << "\n";
      }
    } else if (pub->parsed()) {
      std::ifstream f(pub_result);
      if (!f) throw std::runtime_error("cannot read " + pub_result);
      std::stringstream ss;
      ss << f.rdbuf();
      const auto result =
          privagg::harness::PublishedResult::from_json(ss.str());
      privagg::secsum::RoundReport empty;
      privagg::harness::publish(result, empty, pub_out);
      std::cout << "published to " << pub_out << "\n";
    } else if (serve->parsed()) {
      privagg::harness::ResultServer server(serve_dir, serve_port);
      std::cout << "serving " << serve_dir << " on port " << server.port()
                << " (ctrl-c to stop)\n";
      static std::atomic<bool> stop{false};
      std::signal(SIGINT, [](int) { stop = true; });
      while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
