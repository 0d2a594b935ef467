#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ducsim/runtime.hpp"

namespace ducsim {

using nlohmann::json;

namespace {
json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
}  // namespace

struct TraceWriter::Impl {
  std::ofstream out;
  void line(const json& j) { out << j.dump() << "\n"; }
};

TraceWriter::TraceWriter(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw std::runtime_error("cannot write trace file " + path);
}

TraceWriter::~TraceWriter() = default;

void TraceWriter::wake(double t, RegionId region, int k) {
  impl_->line({{"type", "wake"}, {"t", t}, {"region", region}, {"k", k}});
}

void TraceWriter::solve(double t, RegionId region, int k, double sim_ms, int kappa) {
  impl_->line({{"type", "solve"},
               {"t", t},
               {"region", region},
               {"k", k},
               {"ms", sim_ms},
               {"kappa", kappa}});
}

void TraceWriter::delivery(double t, int from, int to, const std::string& msg) {
  impl_->line({{"type", "delivery"}, {"t", t}, {"from", from}, {"to", to}, {"msg", msg}});
}

void TraceWriter::match(double t, RegionId r1, RegionId r2) {
  impl_->line({{"type", "match"}, {"t", t}, {"r1", r1}, {"r2", r2}});
}

void TraceWriter::iteration(double t, const IterationRecord& rec) {
  impl_->line({{"type", "iter"},
               {"t", t},
               {"region", rec.region},
               {"k", rec.k},
               {"kappa", rec.kappa},
               {"xi", rec.xi},
               {"obj_true", rec.obj_true},
               {"obj_augmented", rec.obj_augmented},
               {"solve_ms", rec.solve_ms},
               {"residuals", {{"kkt", rec.kkt_residual}, {"theta", rec.theta_residual}}}});
}

void TraceWriter::gc(double t) { impl_->line({{"type", "gc"}, {"t", t}}); }

std::string report_to_json(const RegionReport& r) {
  const json j = {{"region", r.region},
                  {"psi", vec_to_json(r.psi)},
                  {"s", vec_to_json(r.s)},
                  {"xi", r.xi},
                  {"kappa", r.kappa}};
  return j.dump();
}

std::string reply_to_json(const ControllerReply& r) {
  json j = {{"sum_psi", vec_to_json(r.sum_psi)},
            {"sum_s", vec_to_json(r.sum_s)},
            {"sum_xi", r.sum_xi}};
  j["partner"] = r.partner ? json(*r.partner) : json(nullptr);
  return j.dump();
}

std::string controller_state_to_json(const Controller& c) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < c.psi_rows().rows(); ++r)
    rows.push_back({{"psi", vec_to_json(c.psi_rows().row(r).transpose())},
                    {"s", vec_to_json(c.s_rows().row(r).transpose())},
                    {"xi", c.xi_flags()[static_cast<size_t>(r)]},
                    {"kappa", c.kappa_flags()[static_cast<size_t>(r)]}});
  json j = {{"regions", rows}, {"pending", c.pending()}, {"gc", c.gc()}};
  return j.dump();
}

void write_result_json(const RunResult& result, const Metrics& metrics, const std::string& path) {
  json j;
  j["mode"] = mode_name(result.mode);
  j["converged"] = result.converged;
  j["gamma"] = result.final_objective;
  j["region_count"] = result.region_count;
  j["seed"] = result.seed;
  j["zeta"] = result.zeta;
  j["iterations_to_gc"] = result.iterations_to_gc;
  j["sim_total_ms"] = result.wall_clock_sim;
  j["max_kkt_residual"] = result.max_kkt_residual;
  j["case"] = result.case_path;
  if (result.central_lb) j["central_lb"] = *result.central_lb;

  json regions = json::array();
  for (const RegionTiming& rt : result.per_region)
    regions.push_back({{"region", rt.region},
                       {"updates", rt.updates},
                       {"compute_ms", rt.compute_ms},
                       {"comm_ms", rt.comm_ms},
                       {"idle_ms", rt.idle_ms}});
  j["per_region"] = regions;

  j["metrics"] = {{"async_degree", metrics.async_degree},
                  {"compute_share", metrics.compute_share},
                  {"comm_share", metrics.comm_share},
                  {"idle_share", metrics.idle_share},
                  {"total_ms", metrics.total_ms}};
  if (metrics.gap_percent) j["metrics"]["gap_percent"] = *metrics.gap_percent;

  json sched;
  sched["x"] = json::array();
  sched["y"] = json::array();
  for (Eigen::Index g = 0; g < result.solution.x.rows(); ++g) {
    sched["x"].push_back(vec_to_json(result.solution.x.row(g).transpose()));
    sched["y"].push_back(vec_to_json(result.solution.y.row(g).transpose()));
  }
  sched["tie_flow"] = json::object();
  for (const auto& [line, f] : result.solution.tie_flow)
    sched["tie_flow"][std::to_string(line)] = vec_to_json(f);
  j["solution"] = sched;

  json mm = json::array();
  for (const TieMismatch& m : result.mismatches)
    mm.push_back({{"line", m.line}, {"max_abs", m.max_abs}});
  j["tie_mismatch"] = mm;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace ducsim
