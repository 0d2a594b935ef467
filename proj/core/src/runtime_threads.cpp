#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include "ducsim/runtime.hpp"

namespace ducsim {

namespace {

template <typename T>
class Mailbox {
 public:
  void push(T item) {
    {
      std::lock_guard lock(m_);
      q_.push_back(std::move(item));
    }
    cv_.notify_all();
  }

  // Blocks until an item arrives or stop fires; empty optional means stop.
  std::optional<T> pop(const std::atomic<bool>& stop) {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty() || stop.load(); });
    if (q_.empty()) return std::nullopt;
    T item = std::move(q_.front());
    q_.pop_front();
    return item;
  }

  void wake_all() { cv_.notify_all(); }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

RunResult run_async_threads(const PowerCase& c, const Partition& p, const RunConfig& cfg) {
  cfg.validate();
  const int K = p.region_count;

  std::vector<RegionView> views;
  std::map<RegionId, std::vector<RegionId>> nbrs;
  for (RegionId r = 0; r < K; ++r) {
    views.push_back(classify_region(c, p, r));
    nbrs[r] = views.back().neighbors;
  }
  Controller ctrl(K, nbrs, c.horizon);
  std::mutex ctrl_mutex;  // the controller serializes its events

  std::vector<std::unique_ptr<Agent>> agents;
  for (RegionId r = 0; r < K; ++r)
    agents.push_back(std::make_unique<Agent>(views[static_cast<size_t>(r)], c, cfg, K));

  std::vector<Mailbox<ControllerReply>> reply_box(static_cast<size_t>(K));
  std::vector<Mailbox<DeltaTuple>> delta_box(static_cast<size_t>(K));
  std::atomic<bool> stop{false};
  std::atomic<bool> hit_max{false};
  std::vector<RegionTiming> timing(static_cast<size_t>(K));
  std::mutex error_mutex;
  std::string error;

  auto stop_all = [&] {
    stop.store(true);
    for (auto& b : reply_box) b.wake_all();
    for (auto& b : delta_box) b.wake_all();
  };

  auto agent_loop = [&](RegionId r) {
    Agent& a = *agents[static_cast<size_t>(r)];
    RegionTiming& t = timing[static_cast<size_t>(r)];
    t.region = r;
    try {
      while (!stop.load()) {
        if (a.k() >= cfg.max_iters) {
          hit_max.store(true);
          stop_all();
          break;
        }
        const auto t0 = Clock::now();
        const RegionReport report = a.begin_iteration();
        const auto t1 = Clock::now();
        t.compute_ms += ms_between(t0, t1) * cfg.scale_for(r);

        std::vector<std::pair<RegionId, ControllerReply>> replies;
        {
          std::lock_guard lock(ctrl_mutex);
          replies = ctrl.on_report(report);
          if (ctrl.check_gc()) stop_all();
        }
        for (auto& [dest, reply] : replies) reply_box[static_cast<size_t>(dest)].push(reply);

        const auto w0 = Clock::now();
        const auto reply = reply_box[static_cast<size_t>(r)].pop(stop);
        t.idle_ms += ms_between(w0, Clock::now());
        if (!reply) break;

        const auto delta_out = a.on_reply(*reply);
        if (delta_out) {
          delta_box[static_cast<size_t>(delta_out->to)].push(*delta_out);
          const auto w1 = Clock::now();
          const auto delta_in = delta_box[static_cast<size_t>(r)].pop(stop);
          t.idle_ms += ms_between(w1, Clock::now());
          if (!delta_in) break;
          a.apply_delta(*delta_in);
        }
        a.end_iteration();
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(error_mutex);
      if (error.empty()) error = e.what();
      stop_all();
    }
  };

  const auto run_start = Clock::now();
  std::vector<std::thread> workers;
  for (RegionId r = 0; r < K; ++r) workers.emplace_back(agent_loop, r);
  for (auto& w : workers) w.join();
  const double elapsed = ms_between(run_start, Clock::now());

  if (!error.empty()) throw std::runtime_error("run_async_threads: " + error);

  RunResult out;
  out.mode = RunMode::async;
  out.converged = ctrl.gc();
  out.region_count = K;
  out.seed = cfg.seed;
  out.zeta = cfg.zeta;
  out.wall_clock_sim = elapsed;

  std::vector<const LocalSolution*> sols;
  for (RegionId r = 0; r < K; ++r) {
    Agent& a = *agents[static_cast<size_t>(r)];
    RegionTiming& t = timing[static_cast<size_t>(r)];
    t.updates = a.k();
    // Whatever is neither solving nor waiting counts as idle tail.
    t.idle_ms += std::max(0.0, elapsed - t.compute_ms - t.comm_ms - t.idle_ms);
    out.per_region.push_back(t);
    out.iterations_to_gc = std::max(out.iterations_to_gc, a.k());
    out.max_kkt_residual = std::max(out.max_kkt_residual, a.max_kkt_seen());
    out.final_objective += a.has_solution() ? a.last_solution().obj_true : 0.0;
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
