#include <doctest.h>

#include "ducsim/agent.hpp"
#include "ducsim/mip.hpp"
#include "fixtures.hpp"

using namespace ducsim;

TEST_CASE("local convergence test") {
  Eigen::VectorXd theta(2), tilde(2), prev(2);
  theta << 0.001, 0.0;
  tilde << 0.0, 0.0;
  prev << 0.00005, 0.0;
  CHECK(check_local_convergence(theta, tilde, prev, 0.01, 0.001) == 1);

  theta << 0.02, 0.0;
  CHECK(check_local_convergence(theta, tilde, prev, 0.01, 0.001) == 0);

  CHECK(check_local_convergence(theta, tilde, std::nullopt, 0.01, 0.001) == 0);
}

TEST_CASE("phase switch needs a full streak and never regresses") {
  CHECK(maybe_switch_phase({1, 1, 1, 1}, 3, Phase::convex) == Phase::binary);
  CHECK(maybe_switch_phase({1, 0, 1, 1}, 3, Phase::convex) == Phase::convex);
  CHECK(maybe_switch_phase({0, 0, 0, 0}, 3, Phase::binary) == Phase::binary);
  CHECK(maybe_switch_phase({1, 1}, 3, Phase::convex) == Phase::convex);  // too short
}

namespace {

// Drives both fixture-A agents through the controller with in-order delivery.
struct TwoAgentHarness {
  PowerCase c = fixtures::case_a();
  Partition p = fixtures::partition_a();
  RunConfig cfg;
  Controller ctrl;
  Agent a0, a1;

  static RunConfig tuned() {
    RunConfig cfg;
    cfg.rho_p = 20.0;  // the production inequality does the stabilizing work
    return cfg;
  }

  TwoAgentHarness()
      : cfg(tuned()),
        ctrl(2, {{0, {1}}, {1, {0}}}, 2),
        a0(classify_region(c, p, 0), c, cfg, 2),
        a1(classify_region(c, p, 1), c, cfg, 2) {}

  // One alternating round: both solve and report, controller matches, tuples
  // cross, both finish.
  void round() {
    const RegionReport r0 = a0.begin_iteration();
    auto replies = ctrl.on_report(r0);
    CHECK(replies.empty());
    const RegionReport r1 = a1.begin_iteration();
    replies = ctrl.on_report(r1);
    REQUIRE(replies.size() == 2);
    ctrl.check_gc();

    std::optional<DeltaTuple> d0, d1;
    for (const auto& [dest, reply] : replies) {
      if (dest == 0) d0 = a0.on_reply(reply);
      else d1 = a1.on_reply(reply);
    }
    REQUIRE(d0.has_value());
    REQUIRE(d1.has_value());
    a0.apply_delta(*d1);
    a1.apply_delta(*d0);
    a0.end_iteration();
    a1.end_iteration();
  }
};

}  // namespace

TEST_CASE("fixture A pair reaches tie-flow agreement") {
  TwoAgentHarness h;
  int rounds = 0;
  while (!h.ctrl.gc() && rounds < 100) {
    h.round();
    ++rounds;
  }
  REQUIRE(h.a0.has_solution());
  REQUIRE(h.a1.has_solution());
  const Eigen::VectorXd f0 = h.a0.last_solution().flow.at(0);
  const Eigen::VectorXd f1 = h.a1.last_solution().flow.at(0);
  CHECK((f0 - f1).cwiseAbs().maxCoeff() <= 0.05);

  // phase monotonicity held implicitly; both ended binary if converged
  if (h.ctrl.gc()) {
    CHECK(h.a0.phase() == Phase::binary);
    CHECK(h.a1.phase() == Phase::binary);
    const double gamma = h.a0.last_solution().obj_true + h.a1.last_solution().obj_true;
    CHECK(gamma == doctest::Approx(13.0).epsilon(0.025));
  }
}

TEST_CASE("single-region agent converges to the centralized cost") {
  const PowerCase c = fixtures::case_a();
  Partition whole;
  whole.region_count = 1;
  whole.owner = {0, 0};
  RunConfig cfg;
  Controller ctrl(1, {{0, {}}}, 2);
  Agent agent(classify_region(c, whole, 0), c, cfg, 1);

  int iters = 0;
  while (!ctrl.gc() && iters < 30) {
    const RegionReport rep = agent.begin_iteration();
    const auto replies = ctrl.on_report(rep);
    REQUIRE(replies.size() == 1);
    CHECK(!replies[0].second.partner.has_value());
    const auto delta = agent.on_reply(replies[0].second);
    CHECK(!delta.has_value());
    agent.end_iteration();
    ctrl.check_gc();
    ++iters;
  }
  REQUIRE(ctrl.gc());
  CHECK(agent.converged());
  CHECK(agent.phase() == Phase::binary);
  const CentralResult central = solve_centralized(c, cfg);
  CHECK(agent.last_solution().obj_true == doctest::Approx(central.gamma_c).epsilon(1e-6));
}

TEST_CASE("echoing an agent's own tuple leaves consensus stationary") {
  TwoAgentHarness h;
  const RegionReport rep = h.a0.begin_iteration();
  ControllerReply reply;
  // zero imbalance snapshot keeps the production target at the solve's own
  // output, so the whole state is a fixed point
  reply.sum_psi = Eigen::VectorXd::Zero(2);
  reply.sum_s = rep.s;
  reply.sum_xi = 0;
  reply.partner = 1;
  const auto out = h.a0.on_reply(reply);
  REQUIRE(out.has_value());

  auto echo = [&]() {
    DeltaTuple d = h.a0.build_delta(1);
    d.from = 1;  // pretend the neighbor sent identical values
    d.to = 0;
    return d;
  };
  h.a0.apply_delta(echo());
  h.a0.end_iteration();

  // theta_bar equals the agent's own theta on every channel (midpoint of
  // identical values), so the next solve is stationary and xi fires after the
  // second echo provides the previous estimate.
  for (const auto& ch : h.a0.consensus().channels) {
    CHECK((ch.theta_bar - h.a0.last_solution().theta.at(ch.bus)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ch.lambda.cwiseAbs().maxCoeff() <= 1e-12);
  }

  const RegionReport rep2 = h.a0.begin_iteration();
  CHECK(rep2.xi == 0);  // only one receipt so far
  h.a0.on_reply(reply);
  h.a0.apply_delta(echo());
  h.a0.end_iteration();

  // Echoing keeps theta_bar glued to the agent's own angles; the proximal
  // solves settle and the convergence flag fires.
  int xi = 0;
  for (int k = 0; k < 30 && xi == 0; ++k) {
    xi = h.a0.begin_iteration().xi;
    h.a0.on_reply(reply);
    h.a0.apply_delta(echo());
    h.a0.end_iteration();
    for (const auto& ch : h.a0.consensus().channels)
      CHECK((ch.theta_bar - h.a0.last_solution().theta.at(ch.bus)).cwiseAbs().maxCoeff() <=
            1e-9);
  }
  CHECK(xi == 1);
}

TEST_CASE("step composition emits one report and one tuple per iteration") {
  TwoAgentHarness h;
  ControllerReply reply;
  reply.sum_psi = Eigen::VectorXd::Zero(2);
  reply.sum_s = Eigen::VectorXd::Constant(2, 1.0);
  reply.sum_xi = 0;
  reply.partner = 1;

  Agent::StepResult first = h.a0.step(reply, std::nullopt);
  CHECK(first.report.region == 0);
  CHECK(first.report.psi.size() == 2);
  REQUIRE(first.delta_out.has_value());
  CHECK(first.delta_out->to == 1);
  CHECK(first.delta_out->thetas.size() == 2);   // both tie endpoints shared
  CHECK(first.delta_out->lambdas.size() == 2);
  CHECK(first.delta_out->phis.size() == 1);
  CHECK(h.a0.k() == 1);

  // controller-forced advance: sum_xi = |R| while still convex
  reply.sum_xi = 2;
  const Agent::StepResult second = h.a0.step(reply, std::nullopt);
  (void)second;
  CHECK(h.a0.phase() == Phase::binary);
  CHECK(!h.a0.converged());

  const Agent::StepResult third = h.a0.step(reply, std::nullopt);
  (void)third;
  CHECK(h.a0.converged());  // binary phase + full xi count
}

TEST_CASE("tuple from an unexpected partner is rejected") {
  TwoAgentHarness h;
  h.a0.begin_iteration();
  ControllerReply reply;
  reply.sum_psi = Eigen::VectorXd::Zero(2);
  reply.sum_s = Eigen::VectorXd::Constant(2, 1.0);
  reply.sum_xi = 0;
  reply.partner = 1;
  h.a0.on_reply(reply);

  DeltaTuple bogus;
  bogus.from = 9;
  bogus.to = 0;
  CHECK_THROWS_AS(h.a0.apply_delta(bogus), std::logic_error);

  DeltaTuple misaddressed;
  misaddressed.from = 1;
  misaddressed.to = 5;
  CHECK_THROWS_AS(h.a0.apply_delta(misaddressed), std::logic_error);
}

TEST_CASE("infeasible subproblem carries region and iteration") {
  PowerCase c = fixtures::case_a();
  c.demand(0, 0) = 50.0;
  RunConfig cfg;
  Agent agent(classify_region(c, fixtures::partition_a(), 0), c, cfg, 2);
  CHECK_THROWS_AS(agent.begin_iteration(), SubproblemInfeasible);
  try {
    agent.begin_iteration();
  } catch (const SubproblemInfeasible& e) {
    CHECK(e.region == 0);
  }
}
