#include <doctest.h>

#include "ducsim/consensus.hpp"
#include "ducsim/rng.hpp"
#include "fixtures.hpp"

using namespace ducsim;

TEST_CASE("phase update frozen examples") {
  SUBCASE("agreement fixed point") {
    const PhaseUpdate u = update_phase(1.0, 0.0, 1.0, 0.0, 2.0);
    CHECK(u.lambda_new == doctest::Approx(0.0));
    CHECK(u.theta_bar == doctest::Approx(1.0));
  }
  SUBCASE("direct evaluation, mixed state") {
    const PhaseUpdate u = update_phase(1.0, 1.0, 0.0, 0.0, 2.0);
    CHECK(u.lambda_new == doctest::Approx(0.5));
    CHECK(u.theta_bar == doctest::Approx(0.75));
  }
  SUBCASE("duals cancel") {
    const PhaseUpdate u = update_phase(0.0, 2.0, 0.0, 2.0, 4.0);
    CHECK(u.lambda_new == doctest::Approx(-2.0));
    CHECK(u.theta_bar == doctest::Approx(0.0));
  }
}

TEST_CASE("flow update frozen examples") {
  SUBCASE("agreement") {
    const FlowUpdate u = update_flow(2.5, 0.0, 2.5, 0.0, 2.0);
    CHECK(u.phi_new == doctest::Approx(0.0));
    CHECK(u.f_bar == doctest::Approx(2.5));
  }
  SUBCASE("disagreement") {
    const FlowUpdate u = update_flow(3.0, 0.0, 1.0, 0.0, 2.0);
    CHECK(u.phi_new == doctest::Approx(2.0));
    CHECK(u.f_bar == doctest::Approx(2.0));
  }
  SUBCASE("opposed duals") {
    const FlowUpdate u = update_flow(0.0, 1.0, 0.0, -1.0, 2.0);
    CHECK(u.phi_new == doctest::Approx(0.0));
    CHECK(u.f_bar == doctest::Approx(0.5));
  }
}

TEST_CASE("neighbor flow estimate") {
  const TransmissionLine line{0, 1, 10.0, 5.0};
  CHECK(neighbor_flow_estimate(0.3, 0.0, line) == doctest::Approx(3.0));
  CHECK(neighbor_flow_estimate(0.7, 0.7, line) == doctest::Approx(0.0));
  CHECK(neighbor_flow_estimate(0.0, 0.3, line) == doctest::Approx(-3.0));
}

TEST_CASE("production statistics on fixture A region 0") {
  const PowerCase c = fixtures::case_a();
  const RegionView v = classify_region(c, fixtures::partition_a(), 0);

  Eigen::MatrixXd y(1, 2);
  y << 8.0, 10.0;
  const ProductionStats st = production_stats(v, c, y);
  CHECK(st.psi[0] == doctest::Approx(-6.0));  // demand 2 - production 8
  CHECK(st.psi[1] == doctest::Approx(-8.0));
  // s = (10-8)/(1*(10-8)) = 1, then all-headroom-consumed guard at t=1
  CHECK(st.s[0] == doctest::Approx(1.0));
  CHECK(st.s[1] == doctest::Approx(0.0));  // p_max reached, denominator 0

  Eigen::MatrixXd balanced(1, 2);
  balanced << 2.0, 2.0;
  const ProductionStats zero = production_stats(v, c, balanced);
  CHECK(zero.psi.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("production target frozen example") {
  Eigen::MatrixXd y(1, 1);
  y << 8.0;
  Eigen::VectorXd s(1), sum_psi(1), sum_s(1);
  s << 0.5;
  sum_psi << 4.0;
  sum_s << 2.0;
  const ProductionTarget t = production_target(y, s, sum_psi, sum_s);
  CHECK(t.mu[0] == doctest::Approx(0.25));
  CHECK(t.p_bar[0] == doctest::Approx(9.0));

  sum_psi << 0.0;
  CHECK(production_target(y, s, sum_psi, sum_s).p_bar[0] == doctest::Approx(8.0));

  sum_s << 0.0;
  s << 0.0;
  const ProductionTarget guarded = production_target(y, s, sum_psi, sum_s);
  CHECK(guarded.mu[0] == doctest::Approx(0.0));
}

TEST_CASE("eta update") {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(1), p(1), pbar(1);
  p << 9.0;
  pbar << 8.0;
  CHECK(update_eta(eta, 2.0, p, pbar)[0] == doctest::Approx(2.0));
  p << 8.0;
  CHECK(update_eta(eta, 2.0, p, pbar)[0] == doctest::Approx(0.0));
  pbar << 7.0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < 3; ++i) acc = update_eta(acc, 1.0, p, pbar);
  CHECK(acc[0] == doctest::Approx(3.0));
}

TEST_CASE("property: agreement fixed point over random samples") {
  RngStream rng(111);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(-5.0, 5.0);
    const double rho = rng.uniform(0.1, 10.0);
    const PhaseUpdate u = update_phase(theta, 0.0, theta, 0.0, rho);
    CHECK(std::abs(u.lambda_new) <= 1e-9);
    CHECK(std::abs(u.theta_bar - theta) <= 1e-9);
    const FlowUpdate f = update_flow(theta, 0.0, theta, 0.0, rho);
    CHECK(std::abs(f.phi_new) <= 1e-9);
    CHECK(std::abs(f.f_bar - theta) <= 1e-9);
  }
}

TEST_CASE("property: equal duals give the exact midpoint") {
  RngStream rng(222);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(-5.0, 5.0);
    const double tilde = rng.uniform(-5.0, 5.0);
    const double lambda = rng.uniform(-3.0, 3.0);
    const double rho = rng.uniform(0.1, 10.0);
    const PhaseUpdate u = update_phase(theta, lambda, tilde, lambda, rho);
    CHECK(std::abs(u.theta_bar - 0.5 * (theta + tilde)) <= 1e-9);
  }
}

TEST_CASE("property: multiplier partition and production target conservation") {
  RngStream rng(333);
  for (int trial = 0; trial < 1000; ++trial) {
    const int regions = rng.uniform_int(2, 6);
    const int T = rng.uniform_int(1, 4);
    std::vector<Eigen::MatrixXd> ys;
    std::vector<Eigen::VectorXd> ss, psis;
    Eigen::VectorXd sum_psi = Eigen::VectorXd::Zero(T);
    Eigen::VectorXd sum_s = Eigen::VectorXd::Zero(T);
    double total_demand_sum = 0.0;
    Eigen::VectorXd demand_t = Eigen::VectorXd::Zero(T);
    for (int r = 0; r < regions; ++r) {
      Eigen::MatrixXd y(1, T);
      Eigen::VectorXd s(T), psi(T);
      for (int t = 0; t < T; ++t) {
        y(0, t) = rng.uniform(0.0, 10.0);
        s[t] = rng.uniform(0.01, 2.0);  // strictly positive residual statistic
        const double demand = rng.uniform(0.0, 10.0);
        psi[t] = demand - y(0, t);
        demand_t[t] += demand;
      }
      sum_psi += psi;
      sum_s += s;
      ys.push_back(y);
      ss.push_back(s);
      psis.push_back(psi);
    }
    Eigen::VectorXd mu_sum = Eigen::VectorXd::Zero(T);
    Eigen::VectorXd pbar_sum = Eigen::VectorXd::Zero(T);
    for (int r = 0; r < regions; ++r) {
      const ProductionTarget t = production_target(ys[static_cast<size_t>(r)],
                                                   ss[static_cast<size_t>(r)], sum_psi, sum_s);
      mu_sum += t.mu;
      pbar_sum += t.p_bar;
    }
    CHECK((mu_sum.array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK((pbar_sum - demand_t).cwiseAbs().maxCoeff() <= 1e-9);
    (void)total_demand_sum;
  }
}

TEST_CASE("property: neighbor flow estimate is antisymmetric") {
  RngStream rng(444);
  const TransmissionLine line{0, 1, 7.5, 5.0};
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    CHECK(std::abs(neighbor_flow_estimate(a, b, line) + neighbor_flow_estimate(b, a, line)) <=
          1e-9);
  }
}

TEST_CASE("consensus state initialization covers the shared boundary") {
  const PowerCase c = fixtures::case_b();
  const RegionView v0 = classify_region(c, fixtures::partition_b(), 0);
  const ConsensusState st = ConsensusState::init(v0, c, c.horizon);
  // region 0 owns {0,1}; ties (0,3) and (1,2); shared buses 0,1,2,3, one
  // channel each toward region 1
  CHECK(st.channels.size() == 4);
  CHECK(st.flows.size() == 2);
  for (const auto& ch : st.channels) {
    CHECK(ch.neighbor == 1);
    CHECK(ch.theta_bar.size() == c.horizon);
    CHECK(ch.lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK(!ch.recv_theta.has_value());
  }
  CHECK(st.p_bar.size() == c.horizon);
  CHECK(st.eta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("production stats guards division by zero headroom cost") {
  const PowerCase c = fixtures::case_a();
  const RegionView v = classify_region(c, fixtures::partition_a(), 0);
  Eigen::MatrixXd y(1, 2);
  y << 10.0, 10.0;  // at p_max: zero headroom
  const ProductionStats st = production_stats(v, c, y);
  CHECK(st.s[0] == 0.0);
  CHECK(st.s[1] == 0.0);
}
