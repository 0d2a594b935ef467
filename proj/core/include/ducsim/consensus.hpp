#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "ducsim/case.hpp"

namespace ducsim {

// One (bus, neighbor-region) consensus channel. A boundary bus touched by two
// neighbors carries two channels; the pairwise exchange updates are per edge.
struct PhaseChannel {
  BusId bus = 0;
  RegionId neighbor = 0;
  Eigen::VectorXd theta_bar;  // intermediate phase angle
  Eigen::VectorXd lambda;     // phase multiplier
  std::optional<Eigen::VectorXd> recv_theta;       // latest received estimate
  std::optional<Eigen::VectorXd> prev_recv_theta;  // previous one, for the drift test
  Eigen::VectorXd recv_lambda;
};

struct FlowChannel {
  LineIdx line = 0;  // canonical orientation; positive flow from->to
  RegionId neighbor = 0;
  Eigen::VectorXd f_bar;    // intermediate flow
  Eigen::VectorXd phi;      // flow multiplier
  Eigen::VectorXd f_tilde;  // neighbor flow estimate from its phase angles
};

// Per-region ADMM state. Everything starts at zero.
struct ConsensusState {
  int T = 0;
  std::vector<PhaseChannel> channels;  // sorted by (bus, neighbor)
  std::vector<FlowChannel> flows;      // sorted by line index
  Eigen::VectorXd p_bar;               // production target
  Eigen::VectorXd eta;                 // production multiplier
  Eigen::VectorXd sum_psi, sum_s;      // controller snapshots
  int sum_xi = 0;

  static ConsensusState init(const RegionView& view, const PowerCase& c, int T);
  PhaseChannel* find_channel(BusId bus, RegionId neighbor);
  FlowChannel* find_flow(LineIdx line);
};

struct PhaseUpdate {
  double lambda_new = 0.0;
  double theta_bar = 0.0;
};
struct FlowUpdate {
  double phi_new = 0.0;
  double f_bar = 0.0;
};

// lambda_hat = -1/2 (lambda + lambda~) + rho/2 (theta - theta~)
// theta_bar  = 1/rho (lambda_hat + lambda) + theta~   (pre-update lambda)
PhaseUpdate update_phase(double theta, double lambda, double theta_tilde, double lambda_tilde,
                         double rho_theta);
FlowUpdate update_flow(double f, double phi, double f_tilde, double phi_tilde, double rho_f);

// f~ = susceptance * (theta_from - theta_to), canonical line direction.
double neighbor_flow_estimate(double theta_from, double theta_to, const TransmissionLine& line);

struct ProductionStats {
  Eigen::VectorXd psi;  // owned demand minus regional generation, per period
  Eigen::VectorXd s;    // inverse average production residual cost
};

// psi_t = sum_{owned b} delta[b][t] - sum_g y[g][t]
// s_t   = sum_g (p_max - y) / sum_g d (p_max - y), 0 when the denominator vanishes
ProductionStats production_stats(const RegionView& view, const PowerCase& c,
                                 const Eigen::MatrixXd& y);

struct ProductionTarget {
  Eigen::VectorXd mu;
  Eigen::VectorXd p_bar;
};

// mu_t = s_t / sum_s_t (0 if sum_s_t ~ 0); p_bar_t = sum_g y + mu_t * sum_psi_t
ProductionTarget production_target(const Eigen::MatrixXd& y, const Eigen::VectorXd& s_local,
                                   const Eigen::VectorXd& sum_psi, const Eigen::VectorXd& sum_s);

Eigen::VectorXd update_eta(const Eigen::VectorXd& eta, double rho_p, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& p_bar);

}  // namespace ducsim
