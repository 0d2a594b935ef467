#pragma once

#include <deque>
#include <optional>
#include <stdexcept>

#include "ducsim/consensus.hpp"
#include "ducsim/controller.hpp"
#include "ducsim/mip.hpp"
#include "ducsim/subproblem.hpp"

namespace ducsim {

enum class Phase { convex, binary };

// Two-way exchange payload between matched neighbors: phase angles and duals
// for the shared buses, flow duals for the shared tie lines.
struct DeltaTuple {
  RegionId from = 0;
  RegionId to = 0;
  std::vector<std::pair<BusId, Eigen::VectorXd>> thetas;
  std::vector<std::pair<BusId, Eigen::VectorXd>> lambdas;
  std::vector<std::pair<LineIdx, Eigen::VectorXd>> phis;
};

// xi = 1 iff ||theta - theta~||_inf < alpha and ||theta~ - theta~_prev||_inf < beta.
// No previous estimate means 0.
int check_local_convergence(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_tilde,
                            const std::optional<Eigen::VectorXd>& theta_tilde_prev, double alpha,
                            double beta);

// Binary once the last zeta+1 flags are all 1; never regresses.
Phase maybe_switch_phase(const std::deque<int>& xi_history, int zeta, Phase kappa);

struct SubproblemInfeasible : std::runtime_error {
  SubproblemInfeasible(RegionId region, int k, const std::string& what)
      : std::runtime_error("region " + std::to_string(region) + " iteration " +
                           std::to_string(k) + ": " + what),
        region(region),
        k(k) {}
  RegionId region;
  int k;
};

struct IterationRecord {
  RegionId region = 0;
  int k = 0;
  int kappa = 0;
  int xi = 0;
  double obj_true = 0.0;
  double obj_augmented = 0.0;
  double solve_ms = 0.0;
  double kkt_residual = 0.0;
  double theta_residual = 0.0;  // ||theta - theta~||_inf over channels
};

// One region's state machine. An iteration runs
//   begin_iteration -> on_reply -> apply_delta -> end_iteration
// with the runtime supplying the controller reply and the partner's tuple.
class Agent {
 public:
  Agent(RegionView view, const PowerCase& c, const RunConfig& cfg, int region_count);

  // Convergence test, phase switch, local solve, production statistics.
  RegionReport begin_iteration();
  // Forced phase advance / convergence mirror, production target, outgoing tuple.
  std::optional<DeltaTuple> on_reply(const ControllerReply& reply);
  // Eq. (3) channel updates driven by the partner's tuple.
  void apply_delta(const DeltaTuple& delta);
  // Production dual update, iteration counter.
  void end_iteration();

  struct StepResult {
    RegionReport report;
    std::optional<DeltaTuple> delta_out;
  };
  // One full iteration with pre-supplied messages (protocol-order preserved).
  StepResult step(const ControllerReply& reply, const std::optional<DeltaTuple>& delta_in);

  DeltaTuple build_delta(RegionId partner) const;

  // Synchronous-mode hooks: the runtime owns the phase switch rule and the
  // constant-multiplier production target.
  void force_binary() { phase_ = Phase::binary; }
  void sync_set_target(const Eigen::VectorXd& sum_psi, const Eigen::VectorXd& sum_s, double mu);

  RegionId region() const { return view_.region; }
  int k() const { return k_; }
  Phase phase() const { return phase_; }
  bool converged() const { return converged_; }
  int last_xi() const { return xi_history_.empty() ? 0 : xi_history_.back(); }
  const RegionView& view() const { return view_; }
  const ConsensusState& consensus() const { return consensus_; }
  ConsensusState& consensus_mutable() { return consensus_; }
  const LocalSolution& last_solution() const;
  bool has_solution() const { return last_solution_.has_value(); }
  const IterationRecord& last_record() const { return record_; }
  double max_kkt_seen() const { return qp_.max_kkt_seen(); }
  const std::vector<RegionId>& delta_partners() const { return partners_; }

 private:
  int compute_xi() const;
  void solve_subproblem();

  RegionView view_;
  const PowerCase* case_;
  RunConfig cfg_;
  int region_count_;
  ConsensusState consensus_;
  QpSolver qp_;
  VarLayout layout_;

  std::optional<LocalSolution> last_solution_;
  std::optional<Eigen::MatrixXd> last_binary_x_, prev_binary_x_;
  Eigen::VectorXd psi_, s_;  // latest production statistics
  std::deque<int> xi_history_;
  int k_ = 0;
  Phase phase_ = Phase::convex;
  bool converged_ = false;
  std::optional<RegionId> expected_partner_;
  std::vector<RegionId> partners_;  // neighbors with at least one shared channel
  IterationRecord record_;
};

}  // namespace ducsim
