#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ducsim/case_io.hpp"
#include "fixtures.hpp"

using namespace ducsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "ducsim_io_tests";
  fs::create_directories(dir);
  return dir;
}

bool cases_equal(const PowerCase& a, const PowerCase& b) {
  if (a.buses != b.buses || a.horizon != b.horizon) return false;
  if (a.generators.size() != b.generators.size() || a.lines.size() != b.lines.size()) return false;
  for (size_t i = 0; i < a.generators.size(); ++i) {
    const auto& x = a.generators[i];
    const auto& y = b.generators[i];
    if (x.id != y.id || x.bus != y.bus || x.p_min != y.p_min || x.p_max != y.p_max ||
        x.cost_dispatch != y.cost_dispatch || x.cost_commit != y.cost_commit ||
        x.cost_startup != y.cost_startup || x.cost_shutdown != y.cost_shutdown ||
        x.min_up != y.min_up || x.min_down != y.min_down || x.ramp != y.ramp)
      return false;
  }
  for (size_t i = 0; i < a.lines.size(); ++i) {
    const auto& x = a.lines[i];
    const auto& y = b.lines[i];
    if (x.from_bus != y.from_bus || x.to_bus != y.to_bus || x.susceptance != y.susceptance ||
        x.f_max != y.f_max)
      return false;
  }
  return a.demand == b.demand;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("case save/load round trip") {
  const fs::path path = temp_dir() / "fixture-a.json";
  save_case(fixtures::case_a(), path.string());
  const PowerCase back = load_case(path.string());
  CHECK(cases_equal(back, fixtures::case_a()));
  CHECK(back.bus_count() == 2);
  CHECK(back.generators.size() == 2);
  CHECK(back.lines.size() == 1);
  CHECK(back.horizon == 2);
}

TEST_CASE("load_case names the missing field") {
  const fs::path path = temp_dir() / "missing-horizon.json";
  std::ofstream(path) << R"({"buses":[0],"generators":[],"lines":[],"demand":{"0":[1.0]}})";
  CHECK_THROWS_WITH_AS(load_case(path.string()),
                       doctest::Contains("horizon"), std::runtime_error);
}

TEST_CASE("load_case rejects invalid cases with violations listed") {
  const fs::path path = temp_dir() / "bad-gen.json";
  PowerCase c = fixtures::case_a();
  c.generators[0].p_min = 99.0;
  save_case(c, path.string());
  CHECK_THROWS_WITH_AS(load_case(path.string()), doctest::Contains("p_min"), std::runtime_error);
}

TEST_CASE("generated case loads back equal (generate-then-load round trip)") {
  const auto [c, p] = fixtures::case_c();
  CHECK(validate_case(c).empty());
  const fs::path cpath = temp_dir() / "fixture-c.json";
  const fs::path ppath = temp_dir() / "fixture-c.partition.json";
  save_case(c, cpath.string());
  save_partition(p, ppath.string());
  CHECK(cases_equal(load_case(cpath.string()), c));
  const Partition pback = load_partition(ppath.string());
  CHECK(pback.region_count == p.region_count);
  CHECK(pback.owner == p.owner);
}

TEST_CASE("partition errors: duplicate owner and missing bus") {
  const fs::path dup = temp_dir() / "dup.json";
  std::ofstream(dup) << R"({"region_count":2,"owner":{"0":0,"1":1,"01":1}})";
  CHECK_THROWS_AS(load_partition(dup.string()), std::runtime_error);

  const fs::path missing = temp_dir() / "missing.json";
  std::ofstream(missing) << R"({"region_count":2,"owner":{"0":0,"2":1}})";
  CHECK_THROWS_WITH_AS(load_partition(missing.string()), doctest::Contains("total map"),
                       std::runtime_error);
}

TEST_CASE("gen_synthetic basics") {
  SUBCASE("smallest split case") {
    const auto [c, p] = gen_synthetic(2, 2, 2, 0);
    CHECK(c.bus_count() == 2);
    CHECK(c.lines.size() == 1);
    CHECK(p.region_count == 2);
    CHECK(p.owner[0] != p.owner[1]);  // one tie line
  }
  SUBCASE("deterministic output, byte identical") {
    const auto [c1, p1] = gen_synthetic(10, 3, 6, 42);
    const auto [c2, p2] = gen_synthetic(10, 3, 6, 42);
    const fs::path f1 = temp_dir() / "det1.json";
    const fs::path f2 = temp_dir() / "det2.json";
    save_case(c1, f1.string());
    save_case(c2, f2.string());
    CHECK(slurp(f1) == slurp(f2));
    CHECK(p1.owner == p2.owner);
  }
  SUBCASE("capacity margin over peak demand") {
    for (const std::uint64_t seed : {1ULL, 7ULL, 123ULL}) {
      const auto [c, p] = gen_synthetic(14, 3, 24, seed);
      double cap = 0.0;
      for (const auto& g : c.generators) cap += g.p_max;
      const double peak = c.demand.colwise().sum().maxCoeff();
      CHECK(cap >= 1.3 * peak - 1e-9);
      CHECK(validate_partition(c, p).empty());
    }
  }
  SUBCASE("infeasible arguments rejected") {
    CHECK_THROWS(gen_synthetic(2, 3, 2, 0));
    CHECK_THROWS(gen_synthetic(5, 2, 0, 0));
  }
}

TEST_CASE("config file round trip and overrides") {
  RunConfig cfg;
  cfg.rho_theta = 5.5;
  cfg.zeta = 4;
  cfg.latency_model = "uniform:0.5,2";
  cfg.compute_model = "constant:3";
  cfg.compute_scale = {{0, 10.0}};
  cfg.mode = RunMode::sync;
  const fs::path path = temp_dir() / "run.cfg";
  save_config(cfg, path.string());
  const RunConfig back = load_config(path.string());
  CHECK(back.rho_theta == doctest::Approx(5.5));
  CHECK(back.zeta == 4);
  CHECK(back.latency_model == "uniform:0.5,2");
  CHECK(back.compute_scale.at(0) == doctest::Approx(10.0));
  CHECK(back.mode == RunMode::sync);

  RunConfig o;
  apply_config_override(o, "alpha=0.01");
  CHECK(o.alpha == doctest::Approx(0.01));
  CHECK_THROWS(apply_config_override(o, "nonsense=1"));
  CHECK_THROWS(apply_config_override(o, "no_equals"));
}

TEST_CASE("config validation rejects out-of-range values") {
  RunConfig cfg;
  cfg.rho_theta = -1.0;
  CHECK_THROWS(cfg.validate());
  cfg = RunConfig{};
  cfg.zeta = 0;
  CHECK_THROWS(cfg.validate());
  cfg = RunConfig{};
  cfg.latency_model = "weibull:1";
  CHECK_THROWS(cfg.validate());
}
