#include "fedpoison/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fedpoison/csv.hpp"
#include "fedpoison/errors.hpp"
#include "fedpoison/kernels.hpp"

namespace fedpoison {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<RoundRecord>& rounds) {
  out << "round,client_id,loss,accuracy,f1,epochs_run\n";
  for (const auto& r : rounds) {
    for (const auto& c : r.clients) {
      out << r.round << ',' << c.client_id << ',' << fmt17(c.eval_loss) << ',' << fmt17(c.eval_accuracy) << ','
          << fmt17(c.eval_f1) << ',' << c.epochs_run << '\n';
    }
    out << r.round << ",agg," << fmt17(r.aggregated.test_loss) << ',' << fmt17(r.aggregated.test_accuracy) << ','
        << fmt17(r.aggregated.test_f1) << ",\n";
  }
}

std::string metrics_csv(const std::vector<RoundRecord>& rounds) {
  std::ostringstream out;
  write_metrics_csv(out, rounds);
  return out.str();
}

json summary_json(const ExperimentReport& report) {
  json final_metrics = json::object();
  if (!report.rounds.empty()) {
    const auto& last = report.rounds.back();
    json clients = json::array();
    for (const auto& c : last.clients) {
      clients.push_back({{"client_id", c.client_id},
                         {"eval_loss", c.eval_loss},
                         {"eval_accuracy", c.eval_accuracy},
                         {"eval_f1", c.eval_f1},
                         {"n_samples", c.n_samples},
                         {"epochs_run", c.epochs_run}});
    }
    final_metrics = {{"round", last.round},
                     {"aggregated",
                      {{"test_loss", last.aggregated.test_loss},
                       {"test_accuracy", last.aggregated.test_accuracy},
                       {"test_f1", last.aggregated.test_f1}}},
                     {"clients", clients}};
  }
  json out{{"config", config_to_json(report.config)},
           {"final", final_metrics},
           {"rounds_completed", report.rounds.size()},
           {"complete", report.complete},
           {"flips", report.flip_log.size()},
           {"mode", report.mode},
           {"kernels", std::string(kernels::isa_name(kernels::active().isa))},
           {"wall_time_s", report.wall_time_s}};
  if (!report.complete) out["failure"] = report.failure;
  return out;
}

void write_outputs(const std::filesystem::path& out_dir, const ExperimentReport& report) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "metrics.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
    write_metrics_csv(out, report.rounds);
  }
  {
    std::ofstream out(out_dir / "summary.json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "summary.json").string());
    out << summary_json(report).dump(2) << '\n';
  }
  write_flip_log(out_dir / "flip_log.csv", report.flip_log);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing metrics file: " + path.string());
  csv::Table table;
  try {
    table = csv::parse(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const std::vector<std::string> expected{"round", "client_id", "loss", "accuracy", "f1", "epochs_run"};
  if (table.header != expected) throw DataError(path.string() + ": unexpected metrics header");
  std::vector<MetricsRow> rows;
  for (const auto& cells : table.rows) {
    MetricsRow row;
    double v = 0.0;
    if (csv::classify(cells[0], v) != csv::CellKind::finite || v < 1 || v != static_cast<unsigned>(v)) {
      throw DataError(path.string() + ": bad round value '" + cells[0] + "'");
    }
    row.round = static_cast<unsigned>(v);
    if (cells[1] == "agg") {
      row.series = "agg";
    } else if (csv::classify(cells[1], v) == csv::CellKind::finite && v >= 0 && v == static_cast<unsigned>(v)) {
      row.series = "client_" + cells[1];
    } else {
      throw DataError(path.string() + ": bad client_id '" + cells[1] + "'");
    }
    double* targets[] = {&row.loss, &row.accuracy, &row.f1};
    for (int k = 0; k < 3; ++k) {
      if (csv::classify(cells[2 + k], *targets[k]) != csv::CellKind::finite) {
        throw DataError(path.string() + ": non-numeric metric '" + cells[2 + k] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": no metric rows");
  return rows;
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRun>& runs) {
  out << "run_id,round,series,metric,value\n";
  for (const auto& run : runs) {
    for (const auto& r : run.rows) {
      out << run.run_id << ',' << r.round << ',' << r.series << ",loss," << fmt17(r.loss) << '\n';
      out << run.run_id << ',' << r.round << ',' << r.series << ",accuracy," << fmt17(r.accuracy) << '\n';
      out << run.run_id << ',' << r.round << ',' << r.series << ",f1," << fmt17(r.f1) << '\n';
    }
  }
}

void write_final_summary(std::ostream& out, const std::vector<ComparisonRun>& runs) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %6s %-10s %10s %10s %10s\n", "run", "round", "series", "loss", "accuracy", "f1");
  out << line;
  for (const auto& run : runs) {
    unsigned last = 0;
    for (const auto& r : run.rows) last = std::max(last, r.round);
    for (const auto& r : run.rows) {
      if (r.round != last) continue;
      std::snprintf(line, sizeof line, "%-24s %6u %-10s %10.4f %10.4f %10.4f\n", run.run_id.c_str(), r.round,
                    r.series.c_str(), r.loss, r.accuracy, r.f1);
      out << line;
    }
  }
}

}  // namespace fedpoison
