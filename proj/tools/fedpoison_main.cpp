#include <cstdio>
#include <fstream>
#include <iostream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "fedpoison/errors.hpp"
#include "fedpoison/log.hpp"
#include "fedpoison/report.hpp"
#include "fedpoison/transport.hpp"

namespace fs = std::filesystem;
using namespace fedpoison;

namespace {

ExperimentConfig load_checked(const fs::path& path) {
  ExperimentConfig config = load_config(path);
  validate(config);
  return config;
}

int cmd_run_sim(const fs::path& config_path, const fs::path& out_dir) {
  const ExperimentConfig config = load_checked(config_path);
  const ExperimentReport report = run_experiment(config);
  write_outputs(out_dir, report);
  spdlog::info("wrote {} rounds to {}", report.rounds.size(), out_dir.string());
  return 0;
}

int cmd_serve(const fs::path& config_path, const fs::path& out_dir, const std::string& listen,
              const std::string& port_file) {
  const ExperimentConfig config = load_checked(config_path);
  Server server(config, net::parse_endpoint(listen));
  if (!port_file.empty()) {
    // Written to a temporary name first so watchers never read a partial file.
    const std::string tmp = port_file + ".tmp";
    std::ofstream(tmp) << server.port() << '\n';
    fs::rename(tmp, port_file);
  }
  const ExperimentReport report = server.run();
  write_outputs(out_dir, report);
  if (!report.complete) {
    std::cerr << "experiment incomplete: " << report.failure << '\n';
    return 1;
  }
  return 0;
}

int cmd_client(const std::string& connect, std::uint32_t client_id, const std::string& config_path,
               const std::string& data_path, const std::string& out_dir) {
  ClientOptions options;
  options.server = net::parse_endpoint(connect);
  options.client_id = client_id;
  if (!config_path.empty()) {
    // Only the local data location is taken from a client-side config; the
    // experiment itself is defined by the server.
    const ExperimentConfig local = load_config(config_path);
    if (!local.data.path.empty()) options.data_path = local.data.path;
  }
  if (!data_path.empty()) options.data_path = data_path;
  if (!out_dir.empty()) options.out_dir = out_dir;
  return client_loop(options);
}

int cmd_gen_data(const fs::path& out, const SyntheticParams& p, std::uint64_t seed, bool as_csv) {
  const Dataset data = make_synthetic(p.n, p.d, p.c, p.separation, seed);
  if (as_csv) {
    write_csv(out, data);
  } else {
    write_cache(out, data);
  }
  spdlog::info("wrote {} rows x {} features, {} classes to {}", data.size(), data.num_features(), data.num_classes(),
               out.string());
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out) {
  std::vector<ComparisonRun> runs;
  for (const auto& dir : run_dirs) {
    fs::path p(dir);
    std::string id = p.lexically_normal().filename().string();
    if (id.empty()) id = p.lexically_normal().parent_path().filename().string();
    runs.push_back({id, read_metrics_csv(p / "metrics.csv")});
  }
  if (out.empty() || out == "-") {
    write_comparison_csv(std::cout, runs);
    write_final_summary(std::cerr, runs);
  } else {
    std::ofstream file(out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + out);
    write_comparison_csv(file, runs);
    write_final_summary(std::cout, runs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Federated learning label-flipping testbed"};
  app.require_subcommand(1);

  std::string config_path, out_dir, listen = "0.0.0.0:9099", port_file, connect = "127.0.0.1:9099", data_path;
  std::uint32_t client_id = 0;

  auto* run_sim = app.add_subcommand("run-sim", "Run an experiment in a single process");
  run_sim->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run_sim->add_option("--out", out_dir, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Coordinate an experiment over TCP");
  serve->add_option("--config", config_path, "Experiment config (JSON)")->required();
  serve->add_option("--out", out_dir, "Output directory")->required();
  serve->add_option("--listen", listen, "host:port to listen on (port 0 = any)")->capture_default_str();
  serve->add_option("--port-file", port_file, "Write the bound port here once listening");

  auto* client = app.add_subcommand("client", "Join an experiment as one client");
  client->add_option("--connect", connect, "Server host:port")->capture_default_str();
  client->add_option("--client-id", client_id, "0-based client id")->required();
  client->add_option("--config", config_path, "Local config; only its data path is used");
  client->add_option("--data", data_path, "Local data path (overrides --config)");
  client->add_option("--out", out_dir, "Where the victim writes flip_log.csv");

  SyntheticParams synth;
  std::uint64_t seed = 0;
  bool as_csv = false;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic Gaussian-blob dataset");
  gen->add_option("--out", out_dir, "Output file")->required();
  gen->add_option("--n", synth.n, "Rows")->capture_default_str();
  gen->add_option("--d", synth.d, "Features")->capture_default_str();
  gen->add_option("--c", synth.c, "Classes")->capture_default_str();
  gen->add_option("--separation", synth.separation, "Distance between class means")->capture_default_str();
  gen->add_option("--seed", seed, "RNG seed")->capture_default_str();
  gen->add_flag("--csv", as_csv, "Write CSV instead of the binary cache format");

  std::vector<std::string> run_dirs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Merge run directories into a long-format CSV");
  report->add_option("run_dirs", run_dirs, "Run output directories")->required();
  report->add_option("--out", report_out, "CSV destination (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run_sim) return cmd_run_sim(config_path, out_dir);
    if (*serve) return cmd_serve(config_path, out_dir, listen, port_file);
    if (*client) return cmd_client(connect, client_id, config_path, data_path, out_dir);
    if (*gen) return cmd_gen_data(out_dir, synth, seed, as_csv);
    if (*report) return cmd_report(run_dirs, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
