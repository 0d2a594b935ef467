#include "ducsim/agent.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <set>

namespace ducsim {

int check_local_convergence(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_tilde,
                            const std::optional<Eigen::VectorXd>& theta_tilde_prev, double alpha,
                            double beta) {
  if (!theta_tilde_prev.has_value()) return 0;
  if (theta.size() != theta_tilde.size() || theta.size() != theta_tilde_prev->size())
    throw std::invalid_argument("check_local_convergence: dimension mismatch");
  const double primal =
      theta.size() == 0 ? 0.0 : (theta - theta_tilde).cwiseAbs().maxCoeff();
  const double drift =
      theta.size() == 0 ? 0.0 : (theta_tilde - *theta_tilde_prev).cwiseAbs().maxCoeff();
  return primal < alpha && drift < beta ? 1 : 0;
}

Phase maybe_switch_phase(const std::deque<int>& xi_history, int zeta, Phase kappa) {
  if (kappa == Phase::binary) return Phase::binary;
  if (static_cast<int>(xi_history.size()) < zeta + 1) return Phase::convex;
  for (int i = 0; i <= zeta; ++i)
    if (xi_history[xi_history.size() - 1 - static_cast<size_t>(i)] != 1) return Phase::convex;
  return Phase::binary;
}

Agent::Agent(RegionView view, const PowerCase& c, const RunConfig& cfg, int region_count)
    : view_(std::move(view)),
      case_(&c),
      cfg_(cfg),
      region_count_(region_count),
      consensus_(ConsensusState::init(view_, c, c.horizon)),
      layout_(VarLayout::make(view_, c.horizon, true)) {
  std::set<RegionId> ps;
  for (const auto& ch : consensus_.channels) ps.insert(ch.neighbor);
  partners_.assign(ps.begin(), ps.end());
}

const LocalSolution& Agent::last_solution() const {
  if (!last_solution_) throw std::logic_error("agent has not solved yet");
  return *last_solution_;
}

int Agent::compute_xi() const {
  if (k_ == 0 || !last_solution_) return 0;
  const int T = consensus_.T;
  const auto n_entries = static_cast<Eigen::Index>(consensus_.channels.size()) * T;
  Eigen::VectorXd own(n_entries), recv(n_entries), prev(n_entries);
  Eigen::Index at = 0;
  for (const auto& ch : consensus_.channels) {
    if (!ch.recv_theta || !ch.prev_recv_theta) return 0;
    own.segment(at, T) = last_solution_->theta.at(ch.bus);
    recv.segment(at, T) = *ch.recv_theta;
    prev.segment(at, T) = *ch.prev_recv_theta;
    at += T;
  }
  const int base = check_local_convergence(own, recv, std::optional(prev), cfg_.alpha, cfg_.beta);
  if (std::getenv("DUCSIM_XI_DEBUG") && view_.region == 0)
    std::fprintf(stderr, "xi r=0 k=%d primal=%.2e drift=%.2e base=%d phase=%d\n", k_,
                 own.size() ? (own - recv).cwiseAbs().maxCoeff() : 0.0,
                 own.size() ? (recv - prev).cwiseAbs().maxCoeff() : 0.0, base, (int)phase_);
  if (phase_ != Phase::binary) return base;
  // In the binary phase, commitments must also have stopped oscillating.
  if (!last_binary_x_ || !prev_binary_x_) return 0;
  const bool stable = ((*last_binary_x_ - *prev_binary_x_).cwiseAbs().maxCoeff() <= 1e-6);
  return base && stable ? 1 : 0;
}

void Agent::solve_subproblem() {
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd xvec;
  double objective = 0.0;
  double kkt = 0.0;
  if (phase_ == Phase::convex) {
    const QPProblem qp = build_convex(view_, consensus_, *case_, cfg_);
    const QPSolution sol = qp_.solve(qp, cfg_.qp_tol, 200);
    if (sol.status == QPStatus::infeasible)
      throw SubproblemInfeasible(view_.region, k_, "convex subproblem infeasible");
    xvec = sol.x;
    objective = sol.objective;
    kkt = sol.kkt_residual;
  } else {
    const MIQPProblem mp = build_binary(view_, consensus_, *case_, cfg_);
    const MIQPSolution sol = solve_miqp(mp, cfg_.mip_gap, cfg_.node_limit, cfg_.qp_tol, &qp_);
    if (sol.status == MIPStatus::infeasible)
      throw SubproblemInfeasible(view_.region, k_, "binary subproblem infeasible");
    if (!std::isfinite(sol.objective))
      throw SubproblemInfeasible(view_.region, k_, "binary subproblem hit the node limit");
    xvec = sol.x;
    objective = sol.objective;
    kkt = qp_.max_kkt_seen();
  }
  const auto t1 = std::chrono::steady_clock::now();

  last_solution_ = extract_solution(view_, layout_, xvec);
  last_solution_->obj_augmented = objective;
  if (phase_ == Phase::binary) {
    prev_binary_x_ = last_binary_x_;
    last_binary_x_ = last_solution_->x;
  }

  record_.region = view_.region;
  record_.k = k_;
  record_.kappa = phase_ == Phase::binary ? 1 : 0;
  record_.obj_true = last_solution_->obj_true;
  record_.obj_augmented = objective;
  record_.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  record_.kkt_residual = kkt;
}

RegionReport Agent::begin_iteration() {
  const auto bt0 = std::chrono::steady_clock::now();
  const int xi = compute_xi();
  const auto bt1 = std::chrono::steady_clock::now();
  xi_history_.push_back(xi);
  while (xi_history_.size() > static_cast<size_t>(cfg_.zeta) + 4) xi_history_.pop_front();
  if (cfg_.mode != RunMode::sync)
    phase_ = maybe_switch_phase(xi_history_, cfg_.zeta, phase_);

  solve_subproblem();
  const auto bt2 = std::chrono::steady_clock::now();
  record_.xi = xi;
  double theta_res = 0.0;
  for (const auto& ch : consensus_.channels)
    if (ch.recv_theta)
      theta_res = std::max(
          theta_res, (last_solution_->theta.at(ch.bus) - *ch.recv_theta).cwiseAbs().maxCoeff());
  record_.theta_residual = theta_res;

  const ProductionStats stats = production_stats(view_, *case_, last_solution_->y);
  psi_ = stats.psi;
  s_ = stats.s;

  const auto bt3 = std::chrono::steady_clock::now();
  if (std::getenv("DUCSIM_AGENT_PROFILE"))
    std::fprintf(stderr, "agent r=%d k=%d phase=%d xi_ms=%.1f solve_ms=%.1f stats_ms=%.1f rec_solve=%.1f\n",
                 view_.region, k_, (int)phase_,
                 std::chrono::duration<double, std::milli>(bt1 - bt0).count(),
                 std::chrono::duration<double, std::milli>(bt2 - bt1).count(),
                 std::chrono::duration<double, std::milli>(bt3 - bt2).count(),
                 record_.solve_ms);
  RegionReport report;
  report.region = view_.region;
  report.psi = psi_;
  report.s = s_;
  report.xi = xi;
  report.kappa = phase_ == Phase::binary ? 1 : 0;
  return report;
}

std::optional<DeltaTuple> Agent::on_reply(const ControllerReply& reply) {
  consensus_.sum_psi = reply.sum_psi;
  consensus_.sum_s = reply.sum_s;
  consensus_.sum_xi = reply.sum_xi;

  if (reply.sum_xi == region_count_) {
    if (phase_ == Phase::binary)
      converged_ = true;
    else
      phase_ = Phase::binary;  // controller-forced advance wins mid-streak
  }

  const ProductionTarget target =
      production_target(last_solution_->y, s_, consensus_.sum_psi, consensus_.sum_s);
  consensus_.p_bar = target.p_bar;

  if (!reply.partner) {
    expected_partner_.reset();
    return std::nullopt;
  }
  expected_partner_ = *reply.partner;
  return build_delta(*reply.partner);
}

DeltaTuple Agent::build_delta(RegionId partner) const {
  DeltaTuple d;
  d.from = view_.region;
  d.to = partner;
  for (const auto& ch : consensus_.channels) {
    if (ch.neighbor != partner) continue;
    d.thetas.emplace_back(ch.bus, last_solution_->theta.at(ch.bus));
    d.lambdas.emplace_back(ch.bus, ch.lambda);
  }
  for (const auto& fc : consensus_.flows) {
    if (fc.neighbor != partner) continue;
    d.phis.emplace_back(fc.line, fc.phi);
  }
  return d;
}

void Agent::apply_delta(const DeltaTuple& delta) {
  if (delta.to != view_.region)
    throw std::logic_error("agent: tuple addressed to a different region");
  if (expected_partner_ && *expected_partner_ != delta.from)
    throw std::logic_error("agent: tuple from an unexpected partner");

  std::map<BusId, const Eigen::VectorXd*> recv_theta;
  for (const auto& [bus, th] : delta.thetas) recv_theta[bus] = &th;
  std::map<BusId, const Eigen::VectorXd*> recv_lambda;
  for (const auto& [bus, lm] : delta.lambdas) recv_lambda[bus] = &lm;
  std::map<LineIdx, const Eigen::VectorXd*> recv_phi;
  for (const auto& [line, ph] : delta.phis) recv_phi[line] = &ph;

  for (auto& ch : consensus_.channels) {
    if (ch.neighbor != delta.from) continue;
    const auto th = recv_theta.find(ch.bus);
    const auto lm = recv_lambda.find(ch.bus);
    if (th == recv_theta.end() || lm == recv_lambda.end())
      throw std::invalid_argument("agent: tuple missing shared bus " + std::to_string(ch.bus));
    ch.prev_recv_theta = ch.recv_theta;
    ch.recv_theta = *th->second;
    ch.recv_lambda = *lm->second;

    const Eigen::VectorXd& own = last_solution_->theta.at(ch.bus);
    const bool post = cfg_.theta_bar_rule == "post";
    for (int t = 0; t < consensus_.T; ++t) {
      const PhaseUpdate u =
          update_phase(own[t], ch.lambda[t], (*ch.recv_theta)[t], ch.recv_lambda[t],
                       cfg_.rho_theta);
      ch.lambda[t] = u.lambda_new;
      ch.theta_bar[t] = post ? 2.0 * u.lambda_new / cfg_.rho_theta + (*ch.recv_theta)[t]
                             : u.theta_bar;
    }
  }

  for (auto& fc : consensus_.flows) {
    if (fc.neighbor != delta.from) continue;
    const TransmissionLine& line = case_->lines[static_cast<size_t>(fc.line)];
    const auto tu = recv_theta.find(line.from_bus);
    const auto tv = recv_theta.find(line.to_bus);
    const auto ph = recv_phi.find(fc.line);
    if (tu == recv_theta.end() || tv == recv_theta.end())
      throw std::invalid_argument("agent: tuple missing tie line endpoint angle");
    if (ph == recv_phi.end())
      throw std::invalid_argument("agent: tuple missing tie line dual");
    const Eigen::VectorXd& own = last_solution_->flow.at(fc.line);
    const bool post = cfg_.theta_bar_rule == "post";
    for (int t = 0; t < consensus_.T; ++t) {
      const double ftil =
          neighbor_flow_estimate((*tu->second)[t], (*tv->second)[t], line);
      const FlowUpdate u = update_flow(own[t], fc.phi[t], ftil, (*ph->second)[t], cfg_.rho_f);
      fc.phi[t] = u.phi_new;
      fc.f_bar[t] = post ? 2.0 * u.phi_new / cfg_.rho_f + ftil : u.f_bar;
      fc.f_tilde[t] = ftil;
    }
  }
  expected_partner_.reset();
}

void Agent::end_iteration() {
  consensus_.eta = update_eta(consensus_.eta, cfg_.rho_p, last_solution_->p, consensus_.p_bar);
  k_ += 1;
  if (std::getenv("DUCSIM_ETA_DEBUG") && k_ % 25 == 0)
    std::fprintf(stderr, "eta r=%d k=%d eta_mean=%+.3f eta_rng=[%+.2f,%+.2f] y_tot=%.1f sum_psi=%.2f\n",
                 view_.region, k_, consensus_.eta.mean(), consensus_.eta.minCoeff(),
                 consensus_.eta.maxCoeff(), last_solution_->y.sum(), consensus_.sum_psi.sum());
}

void Agent::sync_set_target(const Eigen::VectorXd& sum_psi, const Eigen::VectorXd& sum_s,
                            double mu) {
  consensus_.sum_psi = sum_psi;
  consensus_.sum_s = sum_s;
  consensus_.p_bar = last_solution_->y.colwise().sum().transpose() + mu * sum_psi;
}

Agent::StepResult Agent::step(const ControllerReply& reply,
                              const std::optional<DeltaTuple>& delta_in) {
  StepResult out;
  out.report = begin_iteration();
  out.delta_out = on_reply(reply);
  if (delta_in) apply_delta(*delta_in);
  end_iteration();
  return out;
}

}  // namespace ducsim
