#pragma once

#include <memory>
#include <optional>
#include <string>

#include "ducsim/agent.hpp"
#include "ducsim/mip.hpp"

namespace ducsim {

struct RegionTiming {
  RegionId region = 0;
  int updates = 0;
  double compute_ms = 0.0;
  double comm_ms = 0.0;
  double idle_ms = 0.0;

  double total_ms() const { return compute_ms + comm_ms + idle_ms; }
};

struct TieMismatch {
  LineIdx line = 0;
  double max_abs = 0.0;  // max over t of |f_r - f_r'|, canonical sign
};

struct GlobalSchedule {
  Eigen::MatrixXd x, y;  // all generators x T
  std::map<LineIdx, Eigen::VectorXd> tie_flow;  // averaged across both owners
};

struct RunResult {
  RunMode mode = RunMode::async;
  bool converged = false;
  double final_objective = 0.0;  // gamma: sum of regional true costs
  std::vector<RegionTiming> per_region;
  int iterations_to_gc = 0;
  double wall_clock_sim = 0.0;  // ms
  GlobalSchedule solution;
  std::vector<TieMismatch> mismatches;
  double max_kkt_residual = 0.0;
  int region_count = 0;
  std::uint64_t seed = 0;
  int zeta = 0;
  std::string case_path;  // echo for reporting, may be empty
  std::optional<double> central_lb;  // filled when a central reference is known
};

struct Metrics {
  double async_degree = 1.0;  // min updates / max updates
  std::optional<double> gap_percent;
  double compute_share = 0.0;  // percent of summed regional time
  double comm_share = 0.0;
  double idle_share = 0.0;
  double total_ms = 0.0;
};

// JSON-lines event log with simulated timestamps.
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path);
  ~TraceWriter();
  TraceWriter(const TraceWriter&) = delete;
  TraceWriter& operator=(const TraceWriter&) = delete;

  void wake(double t, RegionId region, int k);
  void solve(double t, RegionId region, int k, double sim_ms, int kappa);
  void delivery(double t, int from, int to, const std::string& msg);
  void match(double t, RegionId r1, RegionId r2);
  void iteration(double t, const IterationRecord& rec);
  void gc(double t);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Message-type serializers; the trace uses them and the privacy tests inspect
// their key sets.
std::string report_to_json(const RegionReport& r);
std::string reply_to_json(const ControllerReply& r);
std::string controller_state_to_json(const Controller& c);

RunResult run_async(const PowerCase& c, const Partition& p, const RunConfig& cfg,
                    TraceWriter* trace = nullptr);
RunResult run_sync(const PowerCase& c, const Partition& p, const RunConfig& cfg,
                   TraceWriter* trace = nullptr);
// Concurrent backend: one worker per agent plus the controller; no simulated
// clock, wall time is real. Not bit-reproducible by design.
RunResult run_async_threads(const PowerCase& c, const Partition& p, const RunConfig& cfg);
// Centralized benchmark wrapped in the same result schema.
RunResult run_central(const PowerCase& c, const RunConfig& cfg);

// Dispatches on cfg.mode/backend.
RunResult run(const PowerCase& c, const Partition& p, const RunConfig& cfg,
              TraceWriter* trace = nullptr);

Metrics compute_metrics(const RunResult& result,
                        std::optional<std::pair<double, double>> central = std::nullopt);

struct MergeOutput {
  GlobalSchedule schedule;
  std::vector<TieMismatch> mismatches;
};
MergeOutput merge_solution(const PowerCase& c, const std::vector<RegionView>& views,
                           const std::vector<const LocalSolution*>& solutions);

void write_result_json(const RunResult& result, const Metrics& metrics, const std::string& path);

}  // namespace ducsim
