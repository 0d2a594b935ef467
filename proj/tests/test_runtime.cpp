#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ducsim/runtime.hpp"
#include "fixtures.hpp"

using namespace ducsim;
namespace fs = std::filesystem;

namespace {

RunConfig fixture_config() {
  RunConfig cfg;
  cfg.theta_bar_rule = "post";  // damps mesh circulation modes
  cfg.rho_theta = 50.0;
  cfg.rho_p = 20.0;
  cfg.compute_model = "constant:5";
  cfg.latency_model = "constant:1";
  cfg.max_iters = 300;
  return cfg;
}

void check_accounting(const RunResult& r) {
  for (const RegionTiming& t : r.per_region) {
    CHECK(t.total_ms() == doctest::Approx(r.wall_clock_sim).epsilon(1e-9));
    CHECK(t.updates >= 1);
  }
}

}  // namespace

TEST_CASE("async run on fixture A converges near the centralized cost") {
  const RunResult r = run_async(fixtures::case_a(), fixtures::partition_a(), fixture_config());
  REQUIRE(r.converged);
  const CentralResult central = solve_centralized(fixtures::case_a(), RunConfig{});
  CHECK((r.final_objective - central.gamma_c_lb) / central.gamma_c_lb <= 0.025);
  check_accounting(r);
  REQUIRE(r.mismatches.size() == 1);
  CHECK(r.mismatches[0].max_abs <= 0.05);
  CHECK(r.solution.x(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.max_kkt_residual <= 1e-6);
}

TEST_CASE("async run is deterministic for a fixed seed") {
  RunConfig cfg = fixture_config();
  cfg.seed = 42;
  const RunResult a = run_async(fixtures::case_b(), fixtures::partition_b(), cfg);
  const RunResult b = run_async(fixtures::case_b(), fixtures::partition_b(), cfg);
  CHECK(a.final_objective == b.final_objective);
  CHECK(a.wall_clock_sim == b.wall_clock_sim);
  CHECK(a.iterations_to_gc == b.iterations_to_gc);
  for (size_t i = 0; i < a.per_region.size(); ++i) {
    CHECK(a.per_region[i].updates == b.per_region[i].updates);
    CHECK(a.per_region[i].compute_ms == b.per_region[i].compute_ms);
    CHECK(a.per_region[i].idle_ms == b.per_region[i].idle_ms);
  }
}

TEST_CASE("fixture B: two seeds both converge and agree on cost within 1%") {
  RunConfig cfg = fixture_config();
  cfg.latency_model = "lognormal:0,0.5";
  cfg.seed = 1;
  const RunResult a = run_async(fixtures::case_b(), fixtures::partition_b(), cfg);
  cfg.seed = 2;
  const RunResult b = run_async(fixtures::case_b(), fixtures::partition_b(), cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(std::abs(a.final_objective - b.final_objective) /
            std::max(std::abs(a.final_objective), 1.0) <=
        0.01);
  CHECK(a.wall_clock_sim != b.wall_clock_sim);  // different latency draws
}

TEST_CASE("sync run on fixture A: equal update counts, unit async degree") {
  const RunResult r = run_sync(fixtures::case_a(), fixtures::partition_a(), fixture_config());
  REQUIRE(r.converged);
  const CentralResult central = solve_centralized(fixtures::case_a(), RunConfig{});
  CHECK((r.final_objective - central.gamma_c_lb) / central.gamma_c_lb <= 0.025);
  check_accounting(r);
  CHECK(r.per_region[0].updates == r.per_region[1].updates);
  CHECK(compute_metrics(r).async_degree == doctest::Approx(1.0));
}

TEST_CASE("sync idle per round equals the compute imbalance") {
  RunConfig cfg = fixture_config();
  cfg.compute_scale = {{0, 3.0}};  // region 0 three times slower
  const RunResult r = run_sync(fixtures::case_a(), fixtures::partition_a(), cfg);
  REQUIRE(r.converged);
  const int rounds = r.iterations_to_gc;
  CHECK(r.per_region[0].idle_ms == doctest::Approx(0.0));
  // fastest region idles (max compute - own compute) = (15 - 5) per round
  CHECK(r.per_region[1].idle_ms == doctest::Approx(rounds * 10.0));
  check_accounting(r);
}

TEST_CASE("single-region merge is the identity") {
  const PowerCase c = fixtures::case_a();
  Partition whole;
  whole.region_count = 1;
  whole.owner = {0, 0};
  RunConfig cfg = fixture_config();
  const RunResult r = run_async(c, whole, cfg);
  REQUIRE(r.converged);
  const CentralResult central = solve_centralized(c, RunConfig{});
  CHECK(r.final_objective == doctest::Approx(central.gamma_c).epsilon(1e-6));
  CHECK(r.mismatches.empty());
  CHECK((r.solution.x - central.x).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("central mode wraps the benchmark solve") {
  const RunResult r = run_central(fixtures::case_a(), RunConfig{});
  CHECK(r.converged);
  CHECK(r.final_objective == doctest::Approx(13.0).epsilon(1e-5));
  REQUIRE(r.central_lb.has_value());
  const Metrics m = compute_metrics(r);
  REQUIRE(m.gap_percent.has_value());
  CHECK(*m.gap_percent >= 0.0);
  CHECK(*m.gap_percent <= 0.2);
}

TEST_CASE("non-convergence is a flagged result, not an exception") {
  RunConfig cfg = fixture_config();
  cfg.max_iters = 2;
  const RunResult r = run_async(fixtures::case_a(), fixtures::partition_a(), cfg);
  CHECK(!r.converged);
  CHECK(r.iterations_to_gc <= 2);
}

TEST_CASE("metrics arithmetic") {
  RunResult r;
  r.per_region = {{0, 10, 100.0, 0.0, 0.0}, {1, 8, 100.0, 0.0, 0.0}, {2, 5, 100.0, 0.0, 0.0}};
  r.wall_clock_sim = 100.0;
  CHECK(compute_metrics(r).async_degree == doctest::Approx(0.5));

  RunResult g;
  g.final_objective = 110.0;
  CHECK(*compute_metrics(g, std::pair(110.0, 100.0)).gap_percent == doctest::Approx(10.0));
}

TEST_CASE("threaded backend reaches the same answer on fixture A") {
  RunConfig cfg = fixture_config();
  cfg.backend = "threads";
  const RunResult r = run_async_threads(fixtures::case_a(), fixtures::partition_a(), cfg);
  REQUIRE(r.converged);
  const CentralResult central = solve_centralized(fixtures::case_a(), RunConfig{});
  CHECK((r.final_objective - central.gamma_c_lb) / central.gamma_c_lb <= 0.025);
}

TEST_CASE("trace file is written and replays byte-identically") {
  const fs::path dir = fs::temp_directory_path() / "ducsim_runtime_tests";
  fs::create_directories(dir);
  RunConfig cfg = fixture_config();
  cfg.seed = 9;

  auto run_once = [&](const std::string& name) {
    TraceWriter trace((dir / name).string());
    run_async(fixtures::case_a(), fixtures::partition_a(), cfg, &trace);
  };
  run_once("t1.jsonl");
  run_once("t2.jsonl");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  };
  const std::string t1 = slurp(dir / "t1.jsonl");
  CHECK(!t1.empty());
  CHECK(t1 == slurp(dir / "t2.jsonl"));
  CHECK(t1.find("\"type\":\"match\"") != std::string::npos);
  CHECK(t1.find("\"type\":\"gc\"") != std::string::npos);
}
