#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

#include "ducsim/runtime.hpp"

namespace ducsim {

namespace {

// Per directed edge latency streams; the controller sits at id region_count.
class LatencySampler {
 public:
  LatencySampler(const RunConfig& cfg, int region_count)
      : cfg_(cfg), model_(cfg.latency()), controller_id_(region_count) {}

  double draw(int from, int to) {
    const auto key = std::make_pair(from, to);
    auto it = streams_.find(key);
    if (it == streams_.end()) {
      const std::uint64_t s =
          mix_seed(cfg_.seed, 0x6c6174656e637900ULL + static_cast<std::uint64_t>(from + 1),
                   static_cast<std::uint64_t>(to + 1));
      it = streams_.emplace(key, RngStream(s)).first;
    }
    return std::max(0.0, model_.sample(it->second));
  }

  int controller_id() const { return controller_id_; }

 private:
  const RunConfig& cfg_;
  DelayModel model_;
  int controller_id_;
  std::map<std::pair<int, int>, RngStream> streams_;
};

class ComputeSampler {
 public:
  ComputeSampler(const RunConfig& cfg) : cfg_(cfg) {
    if (!cfg.measured_compute()) model_ = DelayModel::parse(cfg.compute_model);
  }

  double duration(RegionId r, double measured_ms) {
    double base = measured_ms;
    if (model_) {
      auto it = streams_.find(r);
      if (it == streams_.end())
        it = streams_
                 .emplace(r, RngStream(mix_seed(cfg_.seed, 0x636f6d7075746500ULL,
                                                static_cast<std::uint64_t>(r + 1))))
                 .first;
      base = std::max(0.0, model_->sample(it->second));
    }
    return base * cfg_.scale_for(r);
  }

 private:
  const RunConfig& cfg_;
  std::optional<DelayModel> model_;
  std::map<RegionId, RngStream> streams_;
};

struct Msg {
  enum class Kind { report, reply, delta };
  Kind kind;
  int from = 0, to = 0;
  double sent_t = 0.0, flight = 0.0;
  RegionReport report;
  ControllerReply reply;
  DeltaTuple delta;
};

struct Event {
  double t = 0.0;
  long seq = 0;
  enum class Kind { start, solve_done, delivery } kind;
  int region = -1;   // start / solve_done
  size_t msg = 0;    // delivery

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    return seq > o.seq;
  }
};

enum class AState { solving, wait_reply, wait_delta };

struct AgentRt {
  std::unique_ptr<Agent> agent;
  AState state = AState::solving;
  double solve_start = 0.0;
  double wait_start = 0.0;
  double report_flight = 0.0;
  double compute = 0.0, comm = 0.0, idle = 0.0;
  double accounted = 0.0;
  std::optional<Msg> buffered_delta;
  RegionReport pending_report;
  double pending_sim_ms = 0.0;
};

std::string kind_name(Msg::Kind k) {
  switch (k) {
    case Msg::Kind::report: return "report";
    case Msg::Kind::reply: return "reply";
    case Msg::Kind::delta: return "delta";
  }
  return {};
}

}  // namespace

RunResult run_async(const PowerCase& c, const Partition& p, const RunConfig& cfg,
                    TraceWriter* trace) {
  cfg.validate();
  {
    const auto v1 = validate_case(c);
    const auto v2 = validate_partition(c, p);
    if (!v1.empty() || !v2.empty())
      throw std::invalid_argument("run_async: invalid case or partition: " +
                                  (!v1.empty() ? v1.front().str() : v2.front().str()));
  }
  const int K = p.region_count;

  std::vector<RegionView> views;
  std::map<RegionId, std::vector<RegionId>> nbrs;
  for (RegionId r = 0; r < K; ++r) {
    views.push_back(classify_region(c, p, r));
    nbrs[r] = views.back().neighbors;
  }
  Controller ctrl(K, nbrs, c.horizon);

  std::vector<AgentRt> rt(static_cast<size_t>(K));
  for (RegionId r = 0; r < K; ++r)
    rt[static_cast<size_t>(r)].agent = std::make_unique<Agent>(views[static_cast<size_t>(r)], c, cfg, K);

  LatencySampler latency(cfg, K);
  ComputeSampler compute(cfg);

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events;
  std::vector<Msg> msgs;
  long seq = 0;

  auto send = [&](Msg m, double t) {
    m.sent_t = t;
    m.flight = latency.draw(m.from, m.to);
    const double arrive = t + m.flight;
    msgs.push_back(std::move(m));
    events.push({arrive, seq++, Event::Kind::delivery, -1, msgs.size() - 1});
  };

  bool hit_max_iters = false;
  bool infeasible_stop = false;
  std::string infeasible_what;
  long n_events = 0, n_solves = 0;
  double t_agent = 0.0;
  const bool profile = std::getenv("DUCSIM_PROFILE") != nullptr;
  const auto prof_start = std::chrono::steady_clock::now();

  auto start_iteration = [&](RegionId r, double t) {
    AgentRt& a = rt[static_cast<size_t>(r)];
    if (ctrl.gc() || hit_max_iters) return;
    if (a.agent->k() >= cfg.max_iters) {
      hit_max_iters = true;
      return;
    }
    a.state = AState::solving;
    a.solve_start = t;
    if (trace) trace->wake(t, r, a.agent->k());
    const auto pt0 = std::chrono::steady_clock::now();
    a.pending_report = a.agent->begin_iteration();
    t_agent += std::chrono::duration<double>(std::chrono::steady_clock::now() - pt0).count();
    ++n_solves;
    a.pending_sim_ms = compute.duration(r, a.agent->last_record().solve_ms);
    events.push({t + a.pending_sim_ms, seq++, Event::Kind::solve_done, r, 0});
  };

  for (RegionId r = 0; r < K; ++r) events.push({0.0, seq++, Event::Kind::start, r, 0});

  double now = 0.0;
  double gc_time = 0.0;
  try {
    while (!events.empty() && !ctrl.gc() && !hit_max_iters) {
      const Event ev = events.top();
      events.pop();
      now = ev.t;
      ++n_events;

      if (ev.kind == Event::Kind::start) {
        start_iteration(ev.region, now);
        continue;
      }

      if (ev.kind == Event::Kind::solve_done) {
        AgentRt& a = rt[static_cast<size_t>(ev.region)];
        a.compute += now - a.solve_start;
        a.accounted = now;
        IterationRecord rec = a.agent->last_record();
        rec.solve_ms = a.pending_sim_ms;  // simulated duration actually charged
        if (trace) {
          trace->solve(now, ev.region, rec.k, a.pending_sim_ms, rec.kappa);
          trace->iteration(now, rec);
        }
        Msg m;
        m.kind = Msg::Kind::report;
        m.from = ev.region;
        m.to = latency.controller_id();
        m.report = a.pending_report;
        a.state = AState::wait_reply;
        a.wait_start = now;
        send(std::move(m), now);
        a.report_flight = msgs.back().flight;
        continue;
      }

      const Msg& m = msgs[ev.msg];
      if (trace) trace->delivery(now, m.from, m.to, kind_name(m.kind));

      if (m.kind == Msg::Kind::report) {
        const auto replies = ctrl.on_report(m.report);
        if (replies.size() == 2 && trace)
          trace->match(now, replies[0].first, replies[1].first);
        for (const auto& [dest, reply] : replies) {
          Msg rm;
          rm.kind = Msg::Kind::reply;
          rm.from = latency.controller_id();
          rm.to = dest;
          rm.reply = reply;
          send(std::move(rm), now);
        }
        if (ctrl.check_gc()) {
          gc_time = now;
          if (trace) trace->gc(now);
          break;
        }
        continue;
      }

      if (m.kind == Msg::Kind::reply) {
        AgentRt& a = rt[static_cast<size_t>(m.to)];
        const double waited = now - a.wait_start;
        const double in_flight = a.report_flight + m.flight;
        a.comm += std::min(in_flight, waited);
        a.idle += std::max(0.0, waited - in_flight);
        a.accounted = now;
        const auto delta = a.agent->on_reply(m.reply);
        if (!delta) {
          a.agent->end_iteration();
          start_iteration(m.to, now);
          continue;
        }
        Msg dm;
        dm.kind = Msg::Kind::delta;
        dm.from = m.to;
        dm.to = delta->to;
        dm.delta = *delta;
        send(std::move(dm), now);
        a.state = AState::wait_delta;
        a.wait_start = now;
        if (a.buffered_delta) {
          const Msg bd = *a.buffered_delta;
          a.buffered_delta.reset();
          a.agent->apply_delta(bd.delta);
          a.agent->end_iteration();
          start_iteration(m.to, now);
        }
        continue;
      }

      // delta delivery
      AgentRt& a = rt[static_cast<size_t>(m.to)];
      if (a.state != AState::wait_delta) {
        if (a.buffered_delta)
          throw std::logic_error("simulator: two outstanding tuples for one region");
        a.buffered_delta = m;
        continue;
      }
      const double waited = now - a.wait_start;
      a.comm += std::min(m.flight, waited);
      a.idle += std::max(0.0, waited - std::min(m.flight, waited));
      a.accounted = now;
      a.agent->apply_delta(m.delta);
      a.agent->end_iteration();
      start_iteration(m.to, now);
    }
  } catch (const SubproblemInfeasible& e) {
    infeasible_stop = true;
    infeasible_what = e.what();
  }
  if (infeasible_stop) throw std::runtime_error("run_async: " + infeasible_what);

  if (profile)
    std::fprintf(stderr, "profile: events=%ld solves=%ld t_agent=%.1fs t_total=%.1fs\n",
                 n_events, n_solves, t_agent,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - prof_start)
                     .count());
  const double sim_end = ctrl.gc() ? gc_time : now;

  RunResult out;
  out.mode = RunMode::async;
  out.converged = ctrl.gc();
  out.region_count = K;
  out.seed = cfg.seed;
  out.zeta = cfg.zeta;
  out.wall_clock_sim = sim_end;

  std::vector<const LocalSolution*> sols;
  for (RegionId r = 0; r < K; ++r) {
    AgentRt& a = rt[static_cast<size_t>(r)];
    // Tail attribution keeps the per-region accounting identity exact.
    if (a.state == AState::solving)
      a.compute += std::max(0.0, sim_end - a.solve_start);
    else
      a.idle += std::max(0.0, sim_end - a.accounted);
    RegionTiming timing;
    timing.region = r;
    timing.updates = a.agent->k();
    timing.compute_ms = a.compute;
    timing.comm_ms = a.comm;
    timing.idle_ms = a.idle;
    out.per_region.push_back(timing);
    out.iterations_to_gc = std::max(out.iterations_to_gc, a.agent->k());
    out.max_kkt_residual = std::max(out.max_kkt_residual, a.agent->max_kkt_seen());
    out.final_objective += a.agent->has_solution() ? a.agent->last_solution().obj_true : 0.0;
    sols.push_back(a.agent->has_solution() ? &a.agent->last_solution() : nullptr);
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

RunResult run(const PowerCase& c, const Partition& p, const RunConfig& cfg, TraceWriter* trace) {
  switch (cfg.mode) {
    case RunMode::central: return run_central(c, cfg);
    case RunMode::sync: return run_sync(c, p, cfg, trace);
    case RunMode::async:
      return cfg.backend == "threads" ? run_async_threads(c, p, cfg)
                                      : run_async(c, p, cfg, trace);
  }
  throw std::logic_error("run: unknown mode");
}

RunResult run_central(const PowerCase& c, const RunConfig& cfg) {
  const CentralResult central = solve_centralized(c, cfg);
  RunResult out;
  out.mode = RunMode::central;
  out.converged = central.solution.status == MIPStatus::optimal;
  out.final_objective = central.gamma_c;
  out.central_lb = central.gamma_c_lb;
  out.region_count = 1;
  out.seed = cfg.seed;
  out.zeta = cfg.zeta;
  out.solution.x = central.x;
  out.solution.y = central.y;
  out.iterations_to_gc = central.solution.nodes;
  return out;
}

}  // namespace ducsim
