#include "ducsim/consensus.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace ducsim {

ConsensusState ConsensusState::init(const RegionView& view, const PowerCase& c, int T) {
  ConsensusState s;
  s.T = T;

  // Every tie line opens channels for both endpoints, keyed by the region
  // owning the far side; a boundary bus touched by two neighbors carries two.
  std::set<std::pair<BusId, RegionId>> chan_keys;
  std::map<LineIdx, RegionId> line_neighbor;
  for (const LineIdx li : view.tie_lines) {
    const TransmissionLine& l = c.lines[static_cast<size_t>(li)];
    const BusId near = view.owns(l.from_bus) ? l.from_bus : l.to_bus;
    const BusId far = view.owns(l.from_bus) ? l.to_bus : l.from_bus;
    const RegionId owner = view.foreign_owner.at(far);
    line_neighbor[li] = owner;
    chan_keys.emplace(near, owner);
    chan_keys.emplace(far, owner);
  }

  for (const auto& [bus, neighbor] : chan_keys) {
    PhaseChannel ch;
    ch.bus = bus;
    ch.neighbor = neighbor;
    ch.theta_bar = Eigen::VectorXd::Zero(T);
    ch.lambda = Eigen::VectorXd::Zero(T);
    ch.recv_lambda = Eigen::VectorXd::Zero(T);
    s.channels.push_back(std::move(ch));
  }
  for (const LineIdx li : view.tie_lines) {
    FlowChannel fc;
    fc.line = li;
    fc.neighbor = line_neighbor[li];
    fc.f_bar = Eigen::VectorXd::Zero(T);
    fc.phi = Eigen::VectorXd::Zero(T);
    fc.f_tilde = Eigen::VectorXd::Zero(T);
    s.flows.push_back(std::move(fc));
  }
  std::sort(s.flows.begin(), s.flows.end(),
            [](const FlowChannel& a, const FlowChannel& b) { return a.line < b.line; });

  s.p_bar = Eigen::VectorXd::Zero(T);
  s.eta = Eigen::VectorXd::Zero(T);
  s.sum_psi = Eigen::VectorXd::Zero(T);
  s.sum_s = Eigen::VectorXd::Zero(T);
  return s;
}

PhaseChannel* ConsensusState::find_channel(BusId bus, RegionId neighbor) {
  for (auto& ch : channels)
    if (ch.bus == bus && ch.neighbor == neighbor) return &ch;
  return nullptr;
}

FlowChannel* ConsensusState::find_flow(LineIdx line) {
  for (auto& fc : flows)
    if (fc.line == line) return &fc;
  return nullptr;
}

PhaseUpdate update_phase(double theta, double lambda, double theta_tilde, double lambda_tilde,
                         double rho_theta) {
  PhaseUpdate u;
  u.lambda_new = -0.5 * (lambda + lambda_tilde) + 0.5 * rho_theta * (theta - theta_tilde);
  u.theta_bar = (u.lambda_new + lambda) / rho_theta + theta_tilde;
  return u;
}

FlowUpdate update_flow(double f, double phi, double f_tilde, double phi_tilde, double rho_f) {
  FlowUpdate u;
  u.phi_new = -0.5 * (phi + phi_tilde) + 0.5 * rho_f * (f - f_tilde);
  u.f_bar = (u.phi_new + phi) / rho_f + f_tilde;
  return u;
}

double neighbor_flow_estimate(double theta_from, double theta_to, const TransmissionLine& line) {
  return line.susceptance * (theta_from - theta_to);
}

ProductionStats production_stats(const RegionView& view, const PowerCase& c,
                                 const Eigen::MatrixXd& y) {
  const int T = static_cast<int>(y.cols());
  if (y.rows() != static_cast<Eigen::Index>(view.generators.size()))
    throw std::invalid_argument("production_stats: y must be |G_r| x T");
  ProductionStats out;
  out.psi = Eigen::VectorXd::Zero(T);
  out.s = Eigen::VectorXd::Zero(T);
  for (const BusId b : view.owned()) out.psi += c.demand.row(b).head(T).transpose();
  for (int t = 0; t < T; ++t) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index g = 0; g < y.rows(); ++g) {
      const double headroom = view.generators[static_cast<size_t>(g)].p_max - y(g, t);
      num += headroom;
      den += view.generators[static_cast<size_t>(g)].cost_dispatch * headroom;
      out.psi[t] -= y(g, t);
    }
    out.s[t] = std::abs(den) < 1e-12 ? 0.0 : num / den;
  }
  return out;
}

ProductionTarget production_target(const Eigen::MatrixXd& y, const Eigen::VectorXd& s_local,
                                   const Eigen::VectorXd& sum_psi, const Eigen::VectorXd& sum_s) {
  const int T = static_cast<int>(s_local.size());
  ProductionTarget out;
  out.mu = Eigen::VectorXd::Zero(T);
  out.p_bar = Eigen::VectorXd::Zero(T);
  for (int t = 0; t < T; ++t) {
    const double mu = sum_s[t] < 1e-12 ? 0.0 : s_local[t] / sum_s[t];
    out.mu[t] = mu;
    out.p_bar[t] = y.col(t).sum() + mu * sum_psi[t];
  }
  return out;
}

Eigen::VectorXd update_eta(const Eigen::VectorXd& eta, double rho_p, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& p_bar) {
  return eta + rho_p * (p - p_bar);
}

}  // namespace ducsim
