#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ducsim/case_io.hpp"
#include "ducsim/runtime.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_run(const std::string& case_path, const std::string& partition_path,
            const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> mode, std::optional<std::string> backend,
            const std::vector<std::string>& overrides, const std::string& out_dir) {
  ducsim::RunConfig cfg;
  if (!config_path.empty()) cfg = ducsim::load_config(config_path);
  for (const auto& kv : overrides) ducsim::apply_config_override(cfg, kv);
  if (seed) cfg.seed = *seed;
  if (mode) cfg.mode = ducsim::parse_mode(*mode);
  if (backend) cfg.backend = *backend;
  cfg.validate();

  const ducsim::PowerCase c = ducsim::load_case(case_path);
  ducsim::Partition p;
  if (cfg.mode != ducsim::RunMode::central) {
    if (partition_path.empty())
      throw std::runtime_error("--partition is required for async/sync runs");
    p = ducsim::load_partition(partition_path);
  }

  fs::create_directories(out_dir);
  std::optional<ducsim::TraceWriter> trace;
  if (cfg.mode != ducsim::RunMode::central && cfg.backend == "sim")
    trace.emplace((fs::path(out_dir) / "trace.jsonl").string());

  ducsim::RunResult result = ducsim::run(c, p, cfg, trace ? &*trace : nullptr);
  result.case_path = case_path;
  const ducsim::Metrics metrics = ducsim::compute_metrics(result);
  ducsim::write_result_json(result, metrics, (fs::path(out_dir) / "result.json").string());

  std::cout << "mode=" << ducsim::mode_name(result.mode) << " converged=" << result.converged
            << " gamma=" << std::setprecision(10) << result.final_objective
            << " sim_total_ms=" << result.wall_clock_sim
            << " iterations=" << result.iterations_to_gc << "\n";
  if (!result.converged && result.mode != ducsim::RunMode::central) {
    std::cerr << "warning: run did not reach global convergence within max_iters\n";
    return 2;
  }
  return 0;
}

int cmd_gen_case(int buses, int regions, int horizon, std::uint64_t seed,
                 const std::string& out, std::string out_partition) {
  const auto [c, p] = ducsim::gen_synthetic(buses, regions, horizon, seed);
  ducsim::save_case(c, out);
  if (out_partition.empty()) {
    fs::path path(out);
    path.replace_extension(".partition.json");
    out_partition = path.string();
  }
  ducsim::save_partition(p, out_partition);
  std::cout << "case: " << out << "\npartition: " << out_partition << "\n";
  return 0;
}

struct ReportRow {
  std::string mode, case_path;
  std::uint64_t seed = 0;
  int zeta = 0, regions = 0, iterations = 0;
  double gamma = 0, sim_total = 0, compute = 0, comm = 0, idle = 0, async_degree = 1;
  std::optional<double> central_lb;
  std::optional<double> gap_percent;
};

int cmd_report(const std::string& runs_dir, const std::string& out_csv) {
  std::vector<ReportRow> rows;
  std::map<std::string, double> central_lb_by_case;

  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() != "result.json") continue;
    std::ifstream in(entry.path());
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      std::cerr << "skipping " << entry.path() << ": " << e.what() << "\n";
      continue;
    }
    ReportRow row;
    row.mode = j.value("mode", "");
    row.case_path = j.value("case", "");
    row.seed = j.value("seed", 0ULL);
    row.zeta = j.value("zeta", 0);
    row.regions = j.value("region_count", 0);
    row.gamma = j.value("gamma", 0.0);
    row.iterations = j.value("iterations_to_gc", 0);
    row.sim_total = j.value("sim_total_ms", 0.0);
    if (j.contains("central_lb")) row.central_lb = j["central_lb"].get<double>();
    if (j.contains("metrics")) {
      row.async_degree = j["metrics"].value("async_degree", 1.0);
      if (j["metrics"].contains("gap_percent"))
        row.gap_percent = j["metrics"]["gap_percent"].get<double>();
    }
    for (const auto& pr : j.value("per_region", json::array())) {
      row.compute += pr.value("compute_ms", 0.0);
      row.comm += pr.value("comm_ms", 0.0);
      row.idle += pr.value("idle_ms", 0.0);
    }
    if (row.mode == "central" && row.central_lb && !row.case_path.empty())
      central_lb_by_case[row.case_path] = *row.central_lb;
    rows.push_back(std::move(row));
  }

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write " + out_csv);
  out << "mode,seed,zeta,regions,gamma,gap_percent,async_degree,sim_total_ms,compute_ms,"
         "comm_ms,idle_ms,iterations_to_gc\n";
  out << std::setprecision(10);
  for (const ReportRow& r : rows) {
    std::optional<double> gap = r.gap_percent;
    if (!gap && r.mode != "central") {
      const auto it = central_lb_by_case.find(r.case_path);
      if (it != central_lb_by_case.end() && it->second != 0.0)
        gap = (r.gamma - it->second) * 100.0 / it->second;
    }
    out << r.mode << "," << r.seed << "," << r.zeta << "," << r.regions << "," << r.gamma << ",";
    if (gap) out << *gap;
    out << "," << r.async_degree << "," << r.sim_total << "," << r.compute << "," << r.comm
        << "," << r.idle << "," << r.iterations << "\n";
  }
  std::cout << "wrote " << out_csv << " (" << rows.size() << " runs)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized unit-commitment simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "solve a case in async, sync, or central mode");
  std::string case_path, partition_path, config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode, backend;
  std::vector<std::string> overrides;
  run->add_option("--case", case_path, "case JSON file")->required();
  run->add_option("--partition", partition_path, "partition JSON file");
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--seed", seed, "RNG seed (overrides config)");
  run->add_option("--mode", mode, "async|sync|central (overrides config)");
  run->add_option("--backend", backend, "sim|threads (overrides config)");
  run->add_option("--set", overrides, "extra key=value config overrides")->take_all();
  run->add_option("--out", out_dir, "output directory for result.json and trace.jsonl");

  // gen-case
  auto* gen = app.add_subcommand("gen-case", "generate a seeded synthetic case + partition");
  int buses = 14, regions = 3, horizon = 24;
  std::uint64_t gen_seed = 7;
  std::string gen_out, gen_out_partition;
  gen->add_option("--buses", buses, "bus count")->required();
  gen->add_option("--regions", regions, "region count")->required();
  gen->add_option("--horizon", horizon, "planning periods")->required();
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--out", gen_out, "case JSON output path")->required();
  gen->add_option("--out-partition", gen_out_partition,
                  "partition output path (default: derived from --out)");

  // report
  auto* report = app.add_subcommand("report", "aggregate run directories into a CSV");
  std::string runs_dir, out_csv = "results.csv";
  report->add_option("--runs", runs_dir, "directory scanned recursively for result.json")
      ->required();
  report->add_option("--out", out_csv, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(case_path, partition_path, config_path, seed, mode, backend, overrides,
                     out_dir);
    if (gen->parsed())
      return cmd_gen_case(buses, regions, horizon, gen_seed, gen_out, gen_out_partition);
    if (report->parsed()) return cmd_report(runs_dir, out_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
