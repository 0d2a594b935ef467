#include <algorithm>
#include <stdexcept>

#include "ducsim/runtime.hpp"

namespace ducsim {

// Synchronous benchmark: barrier rounds, full exchange on every tie edge,
// exact global sums with the constant multiplier 1/|R|, binary phase entered
// only once every region has locally converged.
RunResult run_sync(const PowerCase& c, const Partition& p, const RunConfig& cfg,
                   TraceWriter* trace) {
  RunConfig scfg = cfg;
  scfg.mode = RunMode::sync;
  scfg.validate();
  const int K = p.region_count;

  std::vector<RegionView> views;
  for (RegionId r = 0; r < K; ++r) views.push_back(classify_region(c, p, r));

  std::vector<std::unique_ptr<Agent>> agents;
  for (RegionId r = 0; r < K; ++r)
    agents.push_back(std::make_unique<Agent>(views[static_cast<size_t>(r)], c, scfg, K));

  // Directed tie edges between regions, for the exchange step.
  std::vector<std::pair<RegionId, RegionId>> edges;
  for (RegionId r = 0; r < K; ++r)
    for (const RegionId n : views[static_cast<size_t>(r)].neighbors) edges.emplace_back(r, n);

  std::map<std::pair<int, int>, RngStream> latency_streams;
  const DelayModel latency = scfg.latency();
  auto edge_latency = [&](int from, int to) {
    auto it = latency_streams.find({from, to});
    if (it == latency_streams.end())
      it = latency_streams
               .emplace(std::make_pair(from, to),
                        RngStream(mix_seed(scfg.seed,
                                           0x6c6174656e637900ULL + static_cast<std::uint64_t>(from + 1),
                                           static_cast<std::uint64_t>(to + 1))))
               .first;
    return std::max(0.0, latency.sample(it->second));
  };

  std::map<RegionId, RngStream> compute_streams;
  std::optional<DelayModel> compute_model;
  if (!scfg.measured_compute()) compute_model = DelayModel::parse(scfg.compute_model);
  auto compute_duration = [&](RegionId r, double measured) {
    double base = measured;
    if (compute_model) {
      auto it = compute_streams.find(r);
      if (it == compute_streams.end())
        it = compute_streams
                 .emplace(r, RngStream(mix_seed(scfg.seed, 0x636f6d7075746500ULL,
                                                static_cast<std::uint64_t>(r + 1))))
                 .first;
      base = std::max(0.0, compute_model->sample(it->second));
    }
    return base * scfg.scale_for(r);
  };

  RunResult out;
  out.mode = RunMode::sync;
  out.region_count = K;
  out.seed = scfg.seed;
  out.zeta = scfg.zeta;
  out.per_region.resize(static_cast<size_t>(K));
  for (RegionId r = 0; r < K; ++r) out.per_region[static_cast<size_t>(r)].region = r;

  double clock = 0.0;
  bool gc = false;
  int rounds = 0;
  bool binary_phase = false;

  while (!gc && rounds < scfg.max_iters) {
    std::vector<RegionReport> reports;
    std::vector<double> durations;
    for (RegionId r = 0; r < K; ++r) {
      Agent& a = *agents[static_cast<size_t>(r)];
      if (trace) trace->wake(clock, r, a.k());
      reports.push_back(a.begin_iteration());
      durations.push_back(compute_duration(r, a.last_record().solve_ms));
    }
    const double max_compute = *std::max_element(durations.begin(), durations.end());

    if (trace)
      for (RegionId r = 0; r < K; ++r) {
        IterationRecord rec = agents[static_cast<size_t>(r)]->last_record();
        rec.solve_ms = durations[static_cast<size_t>(r)];
        trace->solve(clock + durations[static_cast<size_t>(r)], r, rec.k, rec.solve_ms, rec.kappa);
        trace->iteration(clock + durations[static_cast<size_t>(r)], rec);
      }

    bool all_xi = true;
    bool all_binary = true;
    for (const RegionReport& rep : reports) {
      all_xi = all_xi && rep.xi == 1;
      all_binary = all_binary && rep.kappa == 1;
    }

    if (all_xi && all_binary) {
      // Globally converged; this round's solutions stand, no exchange needed.
      for (RegionId r = 0; r < K; ++r) {
        RegionTiming& t = out.per_region[static_cast<size_t>(r)];
        t.compute_ms += durations[static_cast<size_t>(r)];
        t.idle_ms += max_compute - durations[static_cast<size_t>(r)];
      }
      clock += max_compute;
      ++rounds;
      gc = true;
      if (trace) trace->gc(clock);
      break;
    }

    // Exact global sums, constant multiplier.
    Eigen::VectorXd sum_psi = Eigen::VectorXd::Zero(c.horizon);
    Eigen::VectorXd sum_s = Eigen::VectorXd::Zero(c.horizon);
    for (const RegionReport& rep : reports) {
      sum_psi += rep.psi;
      sum_s += rep.s;
    }
    for (RegionId r = 0; r < K; ++r)
      agents[static_cast<size_t>(r)]->sync_set_target(sum_psi, sum_s, 1.0 / K);

    // Barrier exchange: build all tuples against the same snapshot, then apply.
    std::vector<DeltaTuple> tuples;
    double max_edge_latency = 0.0;
    for (const auto& [from, to] : edges) {
      tuples.push_back(agents[static_cast<size_t>(from)]->build_delta(to));
      max_edge_latency = std::max(max_edge_latency, edge_latency(from, to));
    }
    for (const DeltaTuple& d : tuples) agents[static_cast<size_t>(d.to)]->apply_delta(d);
    for (RegionId r = 0; r < K; ++r) agents[static_cast<size_t>(r)]->end_iteration();

    for (RegionId r = 0; r < K; ++r) {
      RegionTiming& t = out.per_region[static_cast<size_t>(r)];
      t.compute_ms += durations[static_cast<size_t>(r)];
      t.comm_ms += max_edge_latency;
      t.idle_ms += max_compute - durations[static_cast<size_t>(r)];
    }
    clock += max_compute + max_edge_latency;
    ++rounds;

    if (all_xi && !binary_phase) {
      binary_phase = true;
      for (auto& a : agents) a->force_binary();
    }
  }

  out.converged = gc;
  out.iterations_to_gc = rounds;
  out.wall_clock_sim = clock;

  std::vector<const LocalSolution*> sols;
  for (RegionId r = 0; r < K; ++r) {
    Agent& a = *agents[static_cast<size_t>(r)];
    out.per_region[static_cast<size_t>(r)].updates = a.k();
    out.final_objective += a.has_solution() ? a.last_solution().obj_true : 0.0;
    out.max_kkt_residual = std::max(out.max_kkt_residual, a.max_kkt_seen());
    sols.push_back(a.has_solution() ? &a.last_solution() : nullptr);
  }
  bool all_solved = true;
  for (const auto* s : sols) all_solved = all_solved && s != nullptr;
  if (all_solved) {
    MergeOutput merged = merge_solution(c, views, sols);
    out.solution = std::move(merged.schedule);
    out.mismatches = std::move(merged.mismatches);
  }
  return out;
}

}  // namespace ducsim
